"""Physical constants and boundary unit conversions.

All internal rates are angular frequencies in rad/s. Frequencies cross the
package boundary in GHz, loss and coupling rates in MHz, fields in mT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float  # J s
    mu_B: float  # J/T
    mu_0: float  # T m/A
    k_B: float  # J/K
    h: float  # J s

    def __post_init__(self):
        for name in ("hbar", "mu_B", "mu_0", "k_B", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be strictly positive")
        if not math.isclose(self.h, 2 * math.pi * self.hbar, rel_tol=4e-16):
            raise ValueError("h must equal 2*pi*hbar")

    @property
    def gyromagnetic_ratio_per_g(self) -> float:
        """mu_B / hbar in rad s^-1 T^-1; multiply by g_s for a given material."""
        return self.mu_B / self.hbar


_H = 6.62607015e-34

# CODATA 2018
CODATA2018 = PhysicalConstants(
    hbar=_H / (2 * math.pi),
    mu_B=9.2740100783e-24,
    mu_0=1.25663706212e-6,
    k_B=1.380649e-23,
    h=_H,
)

TWO_PI = 2 * math.pi


def hz_to_rad(f):
    return TWO_PI * f


def rad_to_hz(w):
    return w / TWO_PI


def ghz_to_rad(f_ghz):
    return TWO_PI * 1e9 * f_ghz


def rad_to_ghz(w):
    return w / (TWO_PI * 1e9)


def mhz_to_rad(f_mhz):
    return TWO_PI * 1e6 * f_mhz


def rad_to_mhz(w):
    return w / (TWO_PI * 1e6)


def mt_to_t(b_mt):
    return b_mt / 1e3


def t_to_mt(b_t):
    return b_t * 1e3
