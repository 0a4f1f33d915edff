"""Exact diagonalisation of the macrospin-photon Hamiltonian.

The exchange-locked ensemble of ``N`` spins is a single spin of length
``N/2``. The Hamiltonian conserves the number of quanta above the fully
polarised, zero-photon ground state, so it splits into blocks labelled by
the excitation number ``E``. Inside a block the basis is ``(n, s)`` with
photon number ``n`` and spin-flip count ``s``, ``n + s = E``, ``0 <= s <= N``.
Basis states are listed by ascending flip count (``s = 0`` first), and the
block is real symmetric tridiagonal:

    diag[s]    = (E - s) * omega_r + s * omega_fmr
    offdiag[s] = g * sqrt(E - s) * sqrt((N - s) * (s + 1))

Energies are measured from the ground state. ``N`` is handled as a float so
macroscopic spin counts (~1e16) need no big integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .tridiagonal import tridiagonal_eigenvalues

DEFAULT_MAX_DIM = 20_000


@dataclass(frozen=True)
class LadderSubspace:
    N: float
    excitations: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.excitations < 0 or int(self.excitations) != self.excitations:
            raise ValueError("excitations must be a non-negative integer")

    @property
    def dim(self) -> int:
        return int(min(self.excitations, math.floor(self.N))) + 1

    @property
    def basis(self) -> list[tuple[int, int]]:
        """``(photon number, flip count)`` pairs ordered by ascending flip count."""
        E = int(self.excitations)
        return [(E - s, s) for s in range(self.dim)]


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    diag: np.ndarray
    offdiag: np.ndarray
    subspace: LadderSubspace = field(compare=False)

    @property
    def dim(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def ladder_element(N: float, s) -> float:
    """Matrix element of the collective raising operator taking ``s`` flips to ``s + 1``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr > N):
        raise ValueError(f"flip count must lie in [0, N={N}]")
    out = np.sqrt((N - s_arr) * (s_arr + 1.0))
    return out[()] if out.ndim == 0 else out


def build_hamiltonian(N: float, E: int, omega_r: float, omega_fmr: float, g: float,
                      max_dim: int = DEFAULT_MAX_DIM) -> TridiagonalHamiltonian:
    if g < 0:
        raise ValueError("g must be non-negative")
    if E < 1:
        raise ValueError("E must be at least 1")
    sub = LadderSubspace(N, E)
    if sub.dim > max_dim:
        raise DimensionError(f"block dimension {sub.dim} exceeds the cap of {max_dim}")
    s = np.arange(sub.dim, dtype=float)
    n = E - s
    diag = n * omega_r + s * omega_fmr
    offdiag = g * np.sqrt(n[:-1]) * ladder_element(N, s[:-1])
    return TridiagonalHamiltonian(diag=diag, offdiag=np.atleast_1d(offdiag), subspace=sub)


def eigenvalues(h: TridiagonalHamiltonian) -> np.ndarray:
    """Ascending eigenvalues (rad/s) of one excitation block."""
    return tridiagonal_eigenvalues(h.diag, h.offdiag)


def vacuum_rabi_splitting(N: float, omega_r: float, g: float) -> float:
    """Eigen-gap of the single-excitation block on resonance.

    Diagonalised in the frame rotating at ``omega_r``; the gap does not depend
    on it, and subtracting it first avoids cancellation when ``g`` is tiny.
    """
    if not omega_r > 0:
        raise ValueError("omega_r must be positive")
    w = eigenvalues(build_hamiltonian(N, 1, 0.0, 0.0, g))
    return float(w[-1] - w[0])


def central_gap(levels: np.ndarray) -> float:
    """Spacing between the level at or just below zero and the next one up."""
    idx = (len(levels) - 1) // 2
    return float(levels[idx + 1] - levels[idx])


def splitting_vs_excitation(N: float, g: float, E_max: int,
                            max_dim: int = DEFAULT_MAX_DIM) -> list[tuple[int, float]]:
    """On-resonance anticrossing gap versus excitation number.

    For each block ``E = 1..E_max`` the gap between the two eigenvalues
    adjacent to the degenerate bare energy ``E * omega_r`` is normalised by
    the single-excitation value ``2 g sqrt(N)``. In the harmonic limit
    ``E << N`` every block has equally spaced levels and the ratio is 1; it
    drops as ``E`` approaches ``N`` (saturation of the macrospin).

    Raises
    ------
    DimensionError
        If any block is larger than ``max_dim`` (default 20000).
    """
    if E_max < 1:
        raise ValueError("E_max must be at least 1")
    if g <= 0:
        raise ValueError("g must be positive for a normalised gap")
    if LadderSubspace(N, E_max).dim > max_dim:
        raise DimensionError(f"block E={E_max} has dimension above the cap of {max_dim}")
    ref = 2.0 * g * math.sqrt(N)
    out = []
    for E in range(1, E_max + 1):
        h = build_hamiltonian(N, E, 0.0, 0.0, g, max_dim=max_dim)
        out.append((E, central_gap(eigenvalues(h)) / ref))
    return out


def single_excitation_branches(N: float, g: float, omega_r: float, detunings) -> np.ndarray:
    """Ladder eigenvalues of the ``E = 1`` block over a detuning grid.

    Returns an array of shape ``(len(detunings), 2)`` holding (lower, upper).
    """
    out = []
    for d in np.atleast_1d(np.asarray(detunings, dtype=float)):
        out.append(eigenvalues(build_hamiltonian(N, 1, omega_r, omega_r + d, g)))
    return np.array(out)
