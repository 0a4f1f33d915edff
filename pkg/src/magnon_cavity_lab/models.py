"""Fit models with analytic Jacobians, wrapped as scikit-learn regressors.

Three models are provided:

``LorentzianPeakRegressor``
    ``amplitude * (w/2)**2 / ((f - f0)**2 + (w/2)**2) + baseline`` on linear
    power; ``w`` is the FWHM. Works in any frequency unit.
``AnticrossingRegressor``
    Normal-mode frequencies of two coupled oscillators versus field. Fields
    in tesla, frequencies in Hz.
``TransmissionMapRegressor``
    dB transmission of the input-output model over the (field, frequency)
    plane. Fields in tesla, frequencies in Hz.

Rates in the fitted attributes are ordinary frequencies (Hz). Parameters
that must be non-negative enter through their absolute value, so zero is
reachable.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .constants import CODATA2018
from .optimize import OptimizerSettings, least_squares

_LN10_10 = 10.0 / math.log(10.0)
# mu_B / h in Hz per tesla
_HZ_PER_T = CODATA2018.mu_B / CODATA2018.h


def _sign(x):
    return 1.0 if x >= 0 else -1.0


# --- Lorentzian ------------------------------------------------------------

def lorentzian(x, center, fwhm, amplitude, baseline):
    h = 0.5 * abs(fwhm)
    return amplitude * h * h / ((x - center) ** 2 + h * h) + baseline


def lorentzian_jacobian(x, center, fwhm, amplitude, baseline):
    """Columns: d/d(center, fwhm, amplitude, baseline)."""
    h = 0.5 * abs(fwhm)
    u = x - center
    D = u * u + h * h
    J = np.empty((np.size(x), 4))
    J[:, 0] = amplitude * h * h * 2.0 * u / D ** 2
    J[:, 1] = amplitude * h * u * u * _sign(fwhm) / D ** 2
    J[:, 2] = h * h / D
    J[:, 3] = 1.0
    return J


def half_max_width(x, y, idx, baseline):
    """FWHM of the peak at ``idx`` from linear interpolation of half-maximum crossings."""
    half = baseline + 0.5 * (y[idx] - baseline)
    i = idx
    while i > 0 and y[i] > half:
        i -= 1
    left = x[i] if y[i] > half else x[i] + (x[i + 1] - x[i]) * (half - y[i]) / (y[i + 1] - y[i])
    j = idx
    while j < len(y) - 1 and y[j] > half:
        j += 1
    right = x[j] if y[j] > half else x[j] - (x[j] - x[j - 1]) * (half - y[j]) / (y[j - 1] - y[j])
    step = np.min(np.diff(x)) if len(x) > 1 else 1.0
    return max(right - left, step)


class LorentzianPeakRegressor(RegressorMixin, BaseEstimator):
    """Single Lorentzian peak on a constant baseline.

    Initial values left as ``None`` are taken from the data: the argmax for
    the centre, the half-maximum crossings for the width and the median for
    the baseline. The fit runs on centred, width- and height-normalised data,
    so results scale exactly with the units of ``X``.
    """

    def __init__(self, center=None, fwhm=None, amplitude=None, baseline=None, settings=None):
        self.center = center
        self.fwhm = fwhm
        self.amplitude = amplitude
        self.baseline = baseline
        self.settings = settings

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        x = X[:, 0]
        if x.size < 4:
            raise ValueError("need at least 4 samples for a 4-parameter Lorentzian")
        order = np.argsort(x)
        x, y = x[order], y[order]
        base = float(np.median(y)) if self.baseline is None else float(self.baseline)
        idx = int(np.argmax(y))
        c0 = float(x[idx]) if self.center is None else float(self.center)
        w0 = half_max_width(x, y, idx, base) if self.fwhm is None else abs(float(self.fwhm))
        a0 = float(y[idx] - base) if self.amplitude is None else float(self.amplitude)
        xs = w0
        ys = abs(a0) if a0 != 0 else (np.max(np.abs(y)) or 1.0)
        u = (x - c0) / xs
        v = y / ys
        p0 = np.array([0.0, 1.0, a0 / ys, base / ys])
        res = least_squares(lambda p: lorentzian(u, *p) - v, p0, self.settings or OptimizerSettings(),
                            jacobian_fn=lambda p: lorentzian_jacobian(u, *p))
        p, cov, diag = res
        scale = np.array([xs, xs, ys, ys])
        self.center_ = c0 + p[0] * xs
        self.fwhm_ = abs(p[1]) * xs
        self.amplitude_ = p[2] * ys
        self.baseline_ = p[3] * ys
        self.covariance_ = cov * np.outer(scale, scale)
        self.converged_ = diag.converged
        self.n_iter_ = diag.iterations
        self.diagnostics_ = diag
        return self

    def predict(self, X):
        check_is_fitted(self, "center_")
        X = check_array(X)
        return lorentzian(X[:, 0], self.center_, self.fwhm_, self.amplitude_, self.baseline_)


# --- coupled-oscillator branches -------------------------------------------
# internal parameter vector: [g_eff (MHz), B_FMR (mT), g_s, f_r (GHz)]

def branch_frequencies_ghz(p, B, label):
    g, B_mt, g_s, f_r = p
    k = _HZ_PER_T / 1e9
    d = g_s * k * (B - B_mt / 1e3)
    R = np.hypot(d, 2.0 * abs(g) / 1e3)
    return f_r + 0.5 * d + 0.5 * label * R


def branch_jacobian_ghz(p, B, label):
    g, B_mt, g_s, f_r = p
    k = _HZ_PER_T / 1e9
    d = g_s * k * (B - B_mt / 1e3)
    G = abs(g) / 1e3
    R = np.maximum(np.hypot(d, 2.0 * G), 1e-300)
    df_dd = 0.5 + 0.5 * label * d / R
    J = np.empty((np.size(B), 4))
    J[:, 0] = label * 2.0 * G / R * _sign(g) / 1e3
    J[:, 1] = df_dd * (-g_s * k / 1e3)
    J[:, 2] = df_dd * k * (B - B_mt / 1e3)
    J[:, 3] = 1.0
    return J


_AC_NAMES = ("g_eff", "B_FMR", "g_s", "f_r")
# internal -> SI (Hz, T, 1, Hz)
_AC_SCALE = np.array([1e6, 1e-3, 1.0, 1e9])


class AnticrossingRegressor(RegressorMixin, BaseEstimator):
    """Two-branch coupled-oscillator fit of peak positions versus field.

    ``X`` holds the field (T) in its first column and optionally a branch
    label (+1 upper, -1 lower, 0 unknown) in the second. Unlabelled points
    are assigned to the nearer branch of the current model, refitting until
    the assignment stops changing (at most ``max_reassign`` rounds).

    ``predict`` uses the label column when present; with a single column it
    returns the photon-like branch (the one closer to ``f_r``), which is what
    a dominant-peak trace follows.
    """

    def __init__(self, g_eff=None, B_FMR=None, g_s=2.0, f_r=None, settings=None, max_reassign=5):
        self.g_eff = g_eff
        self.B_FMR = B_FMR
        self.g_s = g_s
        self.f_r = f_r
        self.settings = settings
        self.max_reassign = max_reassign

    def _p0(self, B, f):
        f_r = float(np.median(f)) if self.f_r is None else float(self.f_r)
        g = float(np.max(np.abs(f - f_r))) if self.g_eff is None else float(self.g_eff)
        B0 = float(B[np.argmax(np.abs(f - f_r))]) if self.B_FMR is None else float(self.B_FMR)
        return np.array([g, B0, float(self.g_s), f_r]) / _AC_SCALE

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[0] < 6:
            raise ValueError("need at least 6 branch points")
        self.n_features_in_ = X.shape[1]
        B = X[:, 0]
        given = X[:, 1] if X.shape[1] > 1 else np.zeros_like(B)
        if np.any(~np.isin(given, (-1.0, 0.0, 1.0))):
            raise ValueError("branch labels must be +1, -1 or 0")
        f = y / 1e9
        p = self._p0(B, y)
        settings = self.settings or OptimizerSettings()
        label = None
        result = None
        for _ in range(max(1, self.max_reassign)):
            up = branch_frequencies_ghz(p, B, 1.0)
            lo = branch_frequencies_ghz(p, B, -1.0)
            auto = np.where(np.abs(f - up) <= np.abs(f - lo), 1.0, -1.0)
            new_label = np.where(given != 0, given, auto)
            if label is not None and np.array_equal(new_label, label):
                break
            label = new_label
            result = least_squares(lambda q: branch_frequencies_ghz(q, B, label) - f, p, settings,
                                   jacobian_fn=lambda q: branch_jacobian_ghz(q, B, label))
            p = result.params
        else:
            if self.max_reassign > 1:
                warnings.warn("branch assignment did not settle", RuntimeWarning, stacklevel=2)
        p = p.copy()
        p[0] = abs(p[0])
        cov = result.covariance * np.outer(_AC_SCALE, _AC_SCALE)
        si = p * _AC_SCALE
        self.g_eff_, self.B_FMR_, self.g_s_, self.f_r_ = (float(v) for v in si)
        self.covariance_ = cov
        self.stderr_ = dict(zip(_AC_NAMES, np.sqrt(np.clip(np.diag(cov), 0, None))))
        self.branch_ = label
        resid = (branch_frequencies_ghz(p, B, label) - f) * 1e9
        self.residual_rms_ = float(np.sqrt(np.mean(resid ** 2)))
        self.converged_ = result.diagnostics.converged
        self.n_iter_ = result.diagnostics.iterations
        self.diagnostics_ = result.diagnostics
        return self

    def _p(self):
        return np.array([self.g_eff_, self.B_FMR_, self.g_s_, self.f_r_]) / _AC_SCALE

    def branches(self, B):
        """Upper and lower branch frequencies (Hz) at fields ``B`` (T)."""
        check_is_fitted(self, "g_eff_")
        B = np.asarray(B, dtype=float)
        p = self._p()
        return branch_frequencies_ghz(p, B, 1.0) * 1e9, branch_frequencies_ghz(p, B, -1.0) * 1e9

    def predict(self, X):
        check_is_fitted(self, "g_eff_")
        X = check_array(X)
        B = X[:, 0]
        if X.shape[1] > 1 and np.all(X[:, 1] != 0):
            label = X[:, 1]
        else:
            d = self.g_s_ * _HZ_PER_T * (B - self.B_FMR_)
            label = np.where(d < 0, 1.0, -1.0)
        return branch_frequencies_ghz(self._p(), B, label) * 1e9


# --- input-output transmission map -------------------------------------------
# internal parameter vector:
# [f_r (GHz), kappa (MHz), g_eff (MHz), gamma (MHz), g_s, B_FMR (mT), amplitude (dB), floor]
# everything below is evaluated in ordinary-frequency MHz; the 2*pi factors cancel.

_TM_NAMES = ("f_r", "kappa", "g_eff", "gamma", "g_s", "B_FMR", "amplitude_db", "floor")
_TM_SCALE = np.array([1e9, 1e6, 1e6, 1e6, 1.0, 1e-3, 1.0, 1.0])


def _tm_parts(p, B, f_mhz):
    f_r, kappa, g, gamma, g_s, B_mt, A = p[:7]
    floor = p[7] if len(p) > 7 else 0.0
    k = _HZ_PER_T / 1e6
    x = f_mhz - 1e3 * f_r
    d = g_s * k * (B - B_mt / 1e3)
    q = 1j * (x - d) - 0.5 * abs(gamma)
    G = g * g
    D = 1j * x - abs(kappa) + G / q
    D2 = D.real ** 2 + D.imag ** 2
    T = kappa * kappa / D2 + abs(floor)
    return x, d, q, G, D, D2, T, k


def transmission_db(p, B, f_mhz):
    *_, T, _k = _tm_parts(p, B, f_mhz)
    return p[6] + _LN10_10 * np.log(T)


def transmission_jacobian(p, B, f_mhz):
    f_r, kappa, g, gamma, g_s, B_mt, A = p[:7]
    x, d, q, G, D, D2, T, k = _tm_parts(p, B, f_mhz)
    kap = abs(kappa)
    conjD = np.conj(D)
    q2 = q * q

    def dT_from_dD(dD):
        return -2.0 * kap * kap * (conjD * dD).real / D2 ** 2

    J = np.empty((np.size(B), len(p)))
    J[:, 0] = dT_from_dD(1e3 * 1j * (G / q2 - 1.0))
    J[:, 1] = _sign(kappa) * (2.0 * kap / D2 + 2.0 * kap * kap * D.real / D2 ** 2)
    J[:, 2] = dT_from_dD(2.0 * g / q)
    J[:, 3] = _sign(gamma) * dT_from_dD(G / (2.0 * q2))
    dD_dd = 1j * G / q2
    J[:, 4] = dT_from_dD(dD_dd * k * (B - B_mt / 1e3))
    J[:, 5] = dT_from_dD(dD_dd * (-g_s * k / 1e3))
    J[:, 6] = 0.0
    if len(p) > 7:
        J[:, 7] = _sign(p[7])
    J *= _LN10_10 / T[:, None]
    J[:, 6] = 1.0
    return J


class TransmissionMapRegressor(RegressorMixin, BaseEstimator):
    """Input-output transmission model fitted in dB over the field-frequency plane.

    The model is ``A + 10 log10(kappa**2 / |D|**2 + |floor|)`` with

        D = i(f - f_r) - kappa + g_eff**2 / (i(f - f_FMR) - gamma/2)

    and ``f_FMR - f_r = g_s mu_B (B - B_FMR) / h``. ``A`` is the dB height of
    the bare resonator peak and ``floor`` a linear power floor relative to it.
    The external coupling rate only scales the transmission, so it is
    absorbed into ``A``; ``kappa`` is the total resonator half-width.

    All initial values except ``amplitude_db`` (taken as the data maximum)
    must be supplied; rates and ``f_r`` in Hz, ``B_FMR`` in tesla.
    """

    def __init__(self, f_r=None, kappa=None, g_eff=None, gamma=None, g_s=None, B_FMR=None,
                 amplitude_db=None, floor=0.0, fit_floor=True, settings=None):
        self.f_r = f_r
        self.kappa = kappa
        self.g_eff = g_eff
        self.gamma = gamma
        self.g_s = g_s
        self.B_FMR = B_FMR
        self.amplitude_db = amplitude_db
        self.floor = floor
        self.fit_floor = fit_floor
        self.settings = settings

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: field (T) and frequency (Hz)")
        self.n_features_in_ = 2
        missing = [n for n in _TM_NAMES[:6] if getattr(self, n) is None]
        if missing:
            raise ValueError(f"initial values required for: {', '.join(missing)}")
        B, f = X[:, 0], X[:, 1] / 1e6
        A0 = float(np.max(y)) if self.amplitude_db is None else float(self.amplitude_db)
        si = [self.f_r, self.kappa, self.g_eff, self.gamma, self.g_s, self.B_FMR, A0, self.floor]
        p0 = np.array(si, dtype=float) / _TM_SCALE
        if not self.fit_floor:
            fixed = p0[7]
            p0 = p0[:7]
            fun = lambda q: transmission_db(np.append(q, fixed), B, f) - y  # noqa: E731
            jac = lambda q: transmission_jacobian(np.append(q, fixed), B, f)[:, :7]  # noqa: E731
        else:
            fun = lambda q: transmission_db(q, B, f) - y  # noqa: E731
            jac = lambda q: transmission_jacobian(q, B, f)  # noqa: E731
        result = least_squares(fun, p0, self.settings or OptimizerSettings(), jacobian_fn=jac)
        p = result.params.copy()
        for i in (1, 2, 3):
            p[i] = abs(p[i])
        if self.fit_floor:
            p[7] = abs(p[7])
        n = len(p)
        scale = _TM_SCALE[:n]
        cov = result.covariance * np.outer(scale, scale)
        full = np.append(p, fixed) if not self.fit_floor else p
        vals = full * _TM_SCALE
        (self.f_r_, self.kappa_, self.g_eff_, self.gamma_, self.g_s_, self.B_FMR_,
         self.amplitude_db_, self.floor_) = (float(v) for v in vals)
        self.covariance_ = cov
        self.param_names_ = _TM_NAMES[:n]
        self.stderr_ = dict(zip(self.param_names_, np.sqrt(np.clip(np.diag(cov), 0, None))))
        resid = result.diagnostics.cost
        self.residual_rms_db_ = float(np.sqrt(2.0 * resid / y.size))
        self.converged_ = result.diagnostics.converged
        self.n_iter_ = result.diagnostics.iterations
        self.diagnostics_ = result.diagnostics
        return self

    def _p(self):
        return np.array([self.f_r_, self.kappa_, self.g_eff_, self.gamma_, self.g_s_, self.B_FMR_,
                         self.amplitude_db_, self.floor_]) / _TM_SCALE

    def predict(self, X):
        check_is_fitted(self, "f_r_")
        X = check_array(X)
        return transmission_db(self._p(), X[:, 0], X[:, 1] / 1e6)
