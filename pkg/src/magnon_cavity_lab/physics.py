"""Closed-form physics of a spin ensemble coupled to a microwave resonator.

Every rate (resonator frequency, loss rates, couplings, detunings) is an
angular frequency in rad/s. Fields are in tesla. Functions broadcast over
numpy arrays for the field and probe-frequency arguments.

Linewidth convention: the transmission is implemented literally as

    S21 = kappa_c / (i(w - w_r) - (kappa_c + kappa_i)
                     + |g_eff|^2 / (i(w - w_FMR) - gamma/2))

so ``kappa_c + kappa_i`` is the half width at half maximum of the bare
resonator line and ``gamma / 2`` is the half width of the bare spin line.
A far-detuned resonator therefore shows a FWHM of ``2 * kappa``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import CODATA2018, PhysicalConstants
from .errors import DomainError, MissingParameterError, SingularTransmissionError


@dataclass(frozen=True)
class ResonatorParams:
    omega_r: float
    kappa_c: float
    kappa_i: float
    mode_volume: Optional[float] = None  # m^3

    def __post_init__(self):
        if not self.omega_r > 0:
            raise ValueError("omega_r must be positive")
        if self.kappa_c < 0 or self.kappa_i < 0:
            raise ValueError("loss rates must be non-negative")
        if not self.kappa_c + self.kappa_i > 0:
            raise ValueError("total resonator loss kappa_c + kappa_i must be positive")
        if self.mode_volume is not None and not self.mode_volume > 0:
            raise ValueError("mode_volume must be positive when set")

    @property
    def kappa(self) -> float:
        return self.kappa_c + self.kappa_i


@dataclass(frozen=True)
class SpinEnsembleParams:
    g_s: float
    B_a: float = 0.0
    gamma: float = 0.0
    rho: Optional[float] = None  # m^-3
    N: Optional[float] = None

    def __post_init__(self):
        if not self.g_s > 0:
            raise ValueError("g_s must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be at least 1")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive when set")


@dataclass(frozen=True)
class HybridModel:
    """One resonator mode hybridised with one spin ensemble.

    ``B_FMR`` is the external field at which the FMR frequency equals the
    resonator frequency. Use :meth:`from_parameters` to derive it from the
    ensemble's g-factor and anisotropy field.
    """

    resonator: ResonatorParams
    ensemble: SpinEnsembleParams
    g_eff: float
    B_FMR: float

    def __post_init__(self):
        if self.g_eff < 0:
            raise ValueError("g_eff must be non-negative")

    @classmethod
    def from_parameters(cls, resonator, ensemble, g_eff, c: PhysicalConstants = CODATA2018):
        B_FMR = resonance_field(ensemble, resonator.omega_r, c)
        return cls(resonator=resonator, ensemble=ensemble, g_eff=g_eff, B_FMR=B_FMR)


def fmr_frequency(ensemble: SpinEnsembleParams, B_ext, c: PhysicalConstants = CODATA2018):
    """Linear Zeeman FMR dispersion ``g_s mu_B (B_ext + B_a) / hbar``.

    Raises
    ------
    DomainError
        If the effective field ``B_ext + B_a`` is negative anywhere; the
        macrospin picture assumes a field-saturated ensemble.
    """
    B_eff = np.asarray(B_ext, dtype=float) + ensemble.B_a
    if np.any(B_eff < 0):
        raise DomainError("negative effective field: B_ext + B_a must be >= 0")
    out = ensemble.g_s * c.mu_B * B_eff / c.hbar
    return out[()] if out.ndim == 0 else out


def resonance_field(ensemble: SpinEnsembleParams, omega_target, c: PhysicalConstants = CODATA2018):
    """External field at which the FMR frequency equals ``omega_target``."""
    w = np.asarray(omega_target, dtype=float)
    if np.any(w <= 0):
        raise DomainError("omega_target must be positive")
    out = c.hbar * w / (ensemble.g_s * c.mu_B) - ensemble.B_a
    return out[()] if out.ndim == 0 else out


def detuning(model: HybridModel, B_ext, c: PhysicalConstants = CODATA2018):
    """``omega_FMR - omega_r`` as a function of the applied field."""
    B = np.asarray(B_ext, dtype=float)
    out = model.ensemble.g_s * c.mu_B * (B - model.B_FMR) / c.hbar
    return out[()] if out.ndim == 0 else out


def polariton_branches(model: HybridModel, B_ext, c: PhysicalConstants = CODATA2018):
    """Upper and lower normal-mode frequencies of two coupled oscillators.

    Returns
    -------
    upper, lower : float or ndarray
        ``omega_r + D/2 +/- sqrt(D**2 + 4 g_eff**2) / 2`` with ``D`` the
        field-dependent detuning.
    """
    d = detuning(model, B_ext, c)
    center = model.resonator.omega_r + 0.5 * d
    half = 0.5 * np.hypot(d, 2.0 * model.g_eff)
    return center + half, center - half


def s21(model: HybridModel, B_ext, omega_probe, c: PhysicalConstants = CODATA2018):
    """Complex input-output transmission amplitude of the hybrid.

    The FMR frequency is taken as ``omega_r + detuning`` so fitted models
    (which carry ``B_FMR`` but no anisotropy field) evaluate identically to
    models built from material parameters.
    """
    res = model.resonator
    w = np.asarray(omega_probe, dtype=float)
    w_fmr = res.omega_r + np.asarray(detuning(model, B_ext, c), dtype=float)
    spin = np.asarray(1j * (w - w_fmr) - 0.5 * model.ensemble.gamma, dtype=complex)
    if model.g_eff == 0:
        spin_term = np.zeros(spin.shape)  # keeps the field axis in the broadcast
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            spin_term = model.g_eff ** 2 / spin
    denom = 1j * (w - res.omega_r) - res.kappa + spin_term
    if np.any(denom == 0):
        raise SingularTransmissionError("transmission denominator vanishes (lossless double resonance)")
    # an undamped spin exactly on resonance blocks transmission completely
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.isfinite(denom), res.kappa_c / denom, 0.0 + 0.0j)
    return out[()] if np.ndim(out) == 0 else out


def vacuum_field(res: ResonatorParams, c: PhysicalConstants = CODATA2018) -> float:
    """Zero-point magnetic field ``sqrt(mu_0 hbar omega_r / (2 V_m))`` in tesla."""
    if res.mode_volume is None:
        raise MissingParameterError("vacuum_field needs the resonator mode_volume")
    return math.sqrt(c.mu_0 * c.hbar * res.omega_r / (2.0 * res.mode_volume))


def single_spin_coupling(res: ResonatorParams, ens: SpinEnsembleParams,
                         c: PhysicalConstants = CODATA2018) -> float:
    return ens.g_s * c.mu_B / (2.0 * c.hbar) * vacuum_field(res, c)


def collective_coupling(res: ResonatorParams, ens: SpinEnsembleParams, filling: float,
                        c: PhysicalConstants = CODATA2018) -> float:
    """Ensemble coupling from spin density and filling factor ``V / V_m``.

    The mode volume cancels: only ``rho`` and ``filling`` enter.
    """
    if not filling > 0:
        raise ValueError("filling factor must be positive")
    if ens.rho is None:
        raise MissingParameterError("collective_coupling needs the ensemble spin density rho")
    return ens.g_s * c.mu_B / (2.0 * c.hbar) * math.sqrt(
        c.mu_0 * ens.rho * c.hbar * res.omega_r * filling / 2.0)


def enhanced_coupling(g: float, N: float) -> float:
    """``g * sqrt(N)``: collective enhancement of a single-spin rate."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return g * math.sqrt(N)


def vacuum_field_from_coupling(g: float, g_s: float, c: PhysicalConstants = CODATA2018) -> float:
    """Invert ``g = g_s mu_B B_10 / (2 hbar)`` for the vacuum field."""
    return 2.0 * c.hbar * g / (g_s * c.mu_B)


def mode_volume_from_coupling(g: float, g_s: float, omega_r: float,
                              c: PhysicalConstants = CODATA2018) -> float:
    B10 = vacuum_field_from_coupling(g, g_s, c)
    return c.mu_0 * c.hbar * omega_r / (2.0 * B10 ** 2)


def spin_count_from_geometry(overlap_length: float, track_width: float, field_depth: float,
                             rho: float) -> float:
    """Number of spins in the box ``overlap_length x track_width x field_depth``."""
    for name, v in (("overlap_length", overlap_length), ("track_width", track_width),
                    ("field_depth", field_depth), ("rho", rho)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    return rho * (overlap_length * track_width * field_depth)


def yig_spin_density(spins_per_cell: float, cell_volume: float) -> float:
    if not (spins_per_cell > 0 and cell_volume > 0):
        raise ValueError("spins_per_cell and cell_volume must be positive")
    return spins_per_cell / cell_volume


def cooperativity(model: HybridModel) -> float:
    """``g_eff**2 / (kappa * gamma)`` with kappa = kappa_c + kappa_i."""
    kappa = model.resonator.kappa
    gamma = model.ensemble.gamma
    if not (kappa > 0 and gamma > 0):
        raise DomainError("cooperativity needs kappa > 0 and gamma > 0")
    return model.g_eff ** 2 / (kappa * gamma)


def cooperativity_from_rates(g_eff: float, kappa: float, gamma: float) -> float:
    if not (kappa > 0 and gamma > 0):
        raise DomainError("cooperativity needs kappa > 0 and gamma > 0")
    return g_eff ** 2 / (kappa * gamma)


def thermal_occupancy(temperature: float, omega: float, c: PhysicalConstants = CODATA2018) -> float:
    """Bose-Einstein mean photon number at ``temperature`` and ``omega``."""
    if not (temperature > 0 and omega > 0):
        raise ValueError("temperature and omega must be positive")
    x = c.hbar * omega / (c.k_B * temperature)
    return 1.0 / math.expm1(x)
