"""Spectrum inversion: slice fits, linewidth traces, branch fits and full-map fits.

Slice fits work on linear power, where a decoupled resonator line is an
exact Lorentzian. The full-map fit works in dB so the large dynamic range of
the map is weighted evenly.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import find_peaks

from .constants import TWO_PI
from .errors import NoAnticrossingError
from .models import (AnticrossingRegressor, LorentzianPeakRegressor, TransmissionMapRegressor,
                     half_max_width)
from .optimize import OptimizerSettings
from .physics import HybridModel, ResonatorParams, SpinEnsembleParams, cooperativity_from_rates
from .spectrum import Spectrum2D

USABLE_FLAGS = ("ok", "two_peak", "broadened")


# --- slices -------------------------------------------------------------------

@dataclass
class LorentzianFit:
    """Result of a single-peak fit.

    ``amplitude`` and ``baseline`` are linear power ratios, as fitted; the
    ``*_db`` properties give the dB values. ``flag`` is one of ``ok``,
    ``two_peak`` (a second resolved peak, see ``secondary``), ``broadened``
    (a second maximum too close to resolve), ``no_peak``, ``failed`` or
    ``outlier`` (set by :func:`linewidth_trace`).
    """

    center: float
    fwhm: float
    amplitude: float
    baseline: float
    covariance: np.ndarray
    converged: bool
    iterations: int
    flag: str = "ok"
    field: float = math.nan
    secondary: Optional["LorentzianFit"] = None

    @property
    def amplitude_db(self) -> float:
        top = self.amplitude + self.baseline
        return 10.0 * math.log10(top) if top > 0 else -math.inf

    @property
    def baseline_db(self) -> float:
        return 10.0 * math.log10(self.baseline) if self.baseline > 0 else -math.inf

    @property
    def stderr(self) -> dict:
        err = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        return dict(zip(("center", "fwhm", "amplitude", "baseline"), err))

    @property
    def usable(self) -> bool:
        return self.flag in USABLE_FLAGS

    @classmethod
    def empty(cls, flag: str, field: float = math.nan) -> "LorentzianFit":
        nan = math.nan
        return cls(nan, nan, nan, nan, np.full((4, 4), nan), False, 0, flag, field)


def robust_noise(y: np.ndarray) -> float:
    """Sample noise level from the median absolute deviation of first differences."""
    d = np.diff(y)
    if d.size == 0:
        return 0.0
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2.0))


def _fit_window(x, y, idx, width, limit_lo, limit_hi, window_fwhm, settings, flag):
    lo = max(x[idx] - window_fwhm * width, limit_lo)
    hi = min(x[idx] + window_fwhm * width, limit_hi)
    sel = np.flatnonzero((x >= lo) & (x <= hi))
    if sel.size < 8:
        # widen symmetrically around the peak sample to eight points
        a = max(0, min(idx - 4, x.size - 8))
        sel = np.arange(a, min(a + 8, x.size))
    if sel.size < 8:
        return LorentzianFit.empty("failed")
    reg = LorentzianPeakRegressor(center=float(x[idx]), fwhm=width, settings=settings)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            reg.fit(x[sel, None], y[sel])
    except (ValueError, np.linalg.LinAlgError):
        return LorentzianFit.empty("failed")
    ok = reg.converged_ and np.isfinite(reg.fwhm_) and reg.fwhm_ > 0 and x[0] <= reg.center_ <= x[-1]
    return LorentzianFit(float(reg.center_), float(reg.fwhm_), float(reg.amplitude_), float(reg.baseline_),
                         reg.covariance_, bool(reg.converged_), int(reg.n_iter_), flag if ok else "failed")


def fit_peaks(x, y, settings: Optional[OptimizerSettings] = None, *, threshold_sigma: float = 3.0,
              min_prominence: float = 0.05, window_fwhm: float = 6.0) -> LorentzianFit:
    """Fit the dominant peak of a linear-power profile ``y(x)``.

    Candidate maxima must exceed ``median(y) + threshold_sigma * sigma``
    (``sigma`` from :func:`robust_noise`) and have a prominence of at least
    ``min_prominence`` times the tallest peak's height above the median. The
    dominant peak is fitted over ``+-window_fwhm`` half-max widths. When the
    next candidate lies further away than the mean of the two widths the
    slice is ``two_peak`` and the secondary peak is fitted too, each fit
    window stopping half-way between the peaks; a closer candidate marks the
    slice ``broadened``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 8:
        raise ValueError("need at least 8 samples")
    base = float(np.median(y))
    sigma = robust_noise(y)
    top = float(np.max(y))
    floor = base + threshold_sigma * sigma
    if top <= floor or top <= base:
        return LorentzianFit.empty("no_peak")
    prom = max(threshold_sigma * sigma, min_prominence * (top - base), np.finfo(float).tiny)
    peaks, _ = find_peaks(y, height=floor, prominence=prom)
    if peaks.size == 0:
        return LorentzianFit.empty("no_peak")
    peaks = peaks[np.argsort(y[peaks])[::-1]]
    main = int(peaks[0])
    w_main = half_max_width(x, y, main, base)
    second, flag = None, "ok"
    for j in peaks[1:]:
        w_j = half_max_width(x, y, int(j), base)
        if abs(x[j] - x[main]) > 0.5 * (w_main + w_j):
            second, w_second, flag = int(j), w_j, "two_peak"
            break
        flag = "broadened"
    lo_lim, hi_lim = -math.inf, math.inf
    if second is not None:
        mid = 0.5 * (x[main] + x[second])
        if x[second] > x[main]:
            hi_lim = mid
        else:
            lo_lim = mid
    fit = _fit_window(x, y, main, w_main, lo_lim, hi_lim, window_fwhm, settings, flag)
    if second is not None and fit.flag != "failed":
        lo2, hi2 = (mid, math.inf) if x[second] > x[main] else (-math.inf, mid)
        sec = _fit_window(x, y, second, w_second, lo2, hi2, window_fwhm, settings, "ok")
        fit.secondary = sec if sec.flag != "failed" else None
        if fit.secondary is None:
            fit.flag = "broadened"
    return fit


def fit_slice(spectrum: Spectrum2D, field_index: int, settings: Optional[OptimizerSettings] = None,
              **kwargs) -> LorentzianFit:
    """Lorentzian fit of one constant-field slice; see :func:`fit_peaks` for options."""
    row = 10.0 ** (spectrum.power[field_index] / 10.0)
    fit = fit_peaks(spectrum.freq_axis, row, settings, **kwargs)
    fit.field = float(spectrum.field_axis[field_index])
    if fit.secondary is not None:
        fit.secondary.field = fit.field
    return fit


class TracePoint(NamedTuple):
    field: float  # T
    center: float  # Hz
    fwhm: float  # Hz
    flag: str


@dataclass
class LinewidthTrace:
    """Per-field slice fits in field order."""

    fits: list

    def __len__(self):
        return len(self.fits)

    def __iter__(self):
        for f in self.fits:
            yield TracePoint(f.field, f.center, f.fwhm, f.flag)

    def __getitem__(self, i):
        f = self.fits[i]
        return TracePoint(f.field, f.center, f.fwhm, f.flag)

    @property
    def fields(self):
        return np.array([f.field for f in self.fits])

    @property
    def centers(self):
        return np.array([f.center for f in self.fits])

    @property
    def fwhms(self):
        return np.array([f.fwhm for f in self.fits])

    @property
    def flags(self):
        return [f.flag for f in self.fits]

    @property
    def usable(self):
        return np.array([f.usable for f in self.fits], dtype=bool)

    def far_detuned_fwhm(self, B_ref: Optional[float] = None, fraction: float = 0.1) -> float:
        """Median FWHM over the usable slices furthest from ``B_ref``.

        ``B_ref`` defaults to the field of the broadest line. ``fraction``
        of the usable slices (at least one) enter the median.
        """
        ok = self.usable
        if not ok.any():
            raise ValueError("trace has no usable slices")
        B, w = self.fields[ok], self.fwhms[ok]
        if B_ref is None:
            B_ref = B[np.argmax(w)]
        k = max(1, int(round(fraction * B.size)))
        far = np.argsort(np.abs(B - B_ref))[::-1][:k]
        return float(np.median(w[far]))


def _flag_outliers(fits, ratio=3.0, half_window=2):
    idx = [i for i, f in enumerate(fits) if f.usable]
    w = np.array([fits[i].fwhm for i in idx])
    for k, i in enumerate(idx):
        neigh = w[max(0, k - half_window):k + half_window + 1]
        ref = float(np.median(neigh))
        if w[k] > ratio * ref or w[k] < ref / ratio:
            fits[i].flag = "outlier"


def linewidth_trace(spectrum: Spectrum2D, settings: Optional[OptimizerSettings] = None,
                    threads: int = 1, **kwargs) -> LinewidthTrace:
    """Fit every field slice; a failing slice is flagged, never fatal.

    Slices whose width differs from the median of their four usable
    neighbours by more than a factor of three are flagged ``outlier``.
    Results do not depend on ``threads``.
    """
    def one(i):
        try:
            return fit_slice(spectrum, i, settings, **kwargs)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            return LorentzianFit.empty("failed", float(spectrum.field_axis[i]))

    n = spectrum.field_axis.size
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(one, range(n)))
    else:
        fits = [one(i) for i in range(n)]
    _flag_outliers(fits)
    return LinewidthTrace(fits)


# --- branches -----------------------------------------------------------------

class BranchPoint(NamedTuple):
    field: float  # T
    freq: float  # Hz
    label: int  # +1 upper, -1 lower, 0 unassigned


def extract_branch_points(trace: LinewidthTrace) -> list[BranchPoint]:
    """Peak positions of usable slices.

    Resolved two-peak slices contribute both peaks, labelled upper/lower;
    single-peak slices contribute one unlabelled point.
    """
    pts = []
    for f in trace.fits:
        if not f.usable:
            continue
        if f.secondary is not None:
            hi, lo = sorted((f.center, f.secondary.center), reverse=True)
            pts.append(BranchPoint(f.field, hi, 1))
            pts.append(BranchPoint(f.field, lo, -1))
        else:
            pts.append(BranchPoint(f.field, f.center, 0))
    return pts


@dataclass
class AnticrossingFit:
    """Coupled-oscillator fit; frequencies in Hz, fields in tesla."""

    g_eff: float
    B_FMR: float
    g_s: float
    f_r: float
    stderr: dict = field(default_factory=dict)
    residual_rms: float = math.nan
    covariance: Optional[np.ndarray] = None
    converged: bool = False
    iterations: int = 0
    rank_deficient: bool = False
    n_points: int = 0

    @property
    def omega_r(self) -> float:
        return TWO_PI * self.f_r

    def branches(self, B):
        reg = AnticrossingRegressor()
        reg.g_eff_, reg.B_FMR_, reg.g_s_, reg.f_r_ = self.g_eff, self.B_FMR, self.g_s, self.f_r
        return reg.branches(B)


def _as_points(points) -> np.ndarray:
    arr = np.array([tuple(p) for p in points], dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("branch points must be (field, freq) or (field, freq, label) tuples")
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.zeros(len(arr))])
    return arr


def guess_anticrossing(points) -> AnticrossingFit:
    """Starting point from branch points alone.

    With labelled pairs the narrowest pair gives ``B_FMR`` and half its
    splitting gives ``g_eff``; otherwise the largest excursion from the
    median frequency is used for both. ``g_s`` starts at 2.
    """
    arr = _as_points(points)
    B, f, lab = arr.T
    f_r = float(np.median(f[lab == 0])) if np.any(lab == 0) else float(np.median(f))
    up = {b: v for b, v, l in arr if l == 1}
    lo = {b: v for b, v, l in arr if l == -1}
    pairs = [(b, up[b] - lo[b]) for b in up if b in lo]
    if pairs:
        b0, split = min(pairs, key=lambda t: t[1])
        return AnticrossingFit(g_eff=0.5 * split, B_FMR=b0, g_s=2.0, f_r=f_r)
    k = int(np.argmax(np.abs(f - f_r)))
    return AnticrossingFit(g_eff=float(abs(f[k] - f_r)), B_FMR=float(B[k]), g_s=2.0, f_r=f_r)


GS_GRID = (1.9, 2.0, 2.1, 2.2)


def fit_anticrossing(branch_points, initial: Optional[AnticrossingFit] = None,
                     settings: Optional[OptimizerSettings] = None) -> AnticrossingFit:
    """Fit upper/lower normal-mode frequencies to branch points.

    Without ``initial`` the fit starts from :func:`guess_anticrossing` at each
    ``g_s`` in ``GS_GRID`` and keeps the lowest residual. Unlabelled points
    are assigned to the nearer branch.
    """
    arr = _as_points(branch_points)
    if arr.shape[0] < 6:
        raise ValueError("need at least 6 branch points")
    X, y = arr[:, [0, 2]], arr[:, 1]
    if initial is None:
        g0 = guess_anticrossing(arr)
        starts = [replace(g0, g_s=gs) for gs in GS_GRID]
    else:
        starts = [initial]
    best = None
    for s in starts:
        reg = AnticrossingRegressor(g_eff=s.g_eff, B_FMR=s.B_FMR, g_s=s.g_s, f_r=s.f_r, settings=settings)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            reg.fit(X, y)
        if best is None or reg.diagnostics_.cost < best.diagnostics_.cost:
            best = reg
    d = best.diagnostics_
    if d.rank_deficient:
        warnings.warn(f"anticrossing fit is rank deficient (rank {d.rank} < 4)", RuntimeWarning, stacklevel=2)
    return AnticrossingFit(g_eff=best.g_eff_, B_FMR=best.B_FMR_, g_s=best.g_s_, f_r=best.f_r_,
                           stderr={k: float(v) for k, v in best.stderr_.items()},
                           residual_rms=best.residual_rms_, covariance=best.covariance_,
                           converged=bool(d.converged), iterations=d.iterations,
                           rank_deficient=bool(d.rank_deficient), n_points=int(arr.shape[0]))


# --- full map -------------------------------------------------------------------

@dataclass
class FullModelFit:
    """Full transmission-map fit. Rates and ``f_r`` in Hz, ``B_FMR`` in tesla.

    ``kappa`` is the total resonator half-width, ``amplitude_db`` the dB
    height of the bare resonator peak and ``floor`` a linear power floor
    relative to it. ``at_bound`` lists rates that ended at zero.
    """

    f_r: float
    kappa: float
    g_eff: float
    gamma: float
    g_s: float
    B_FMR: float
    amplitude_db: float = 0.0
    floor: float = 0.0
    stderr: dict = field(default_factory=dict)
    covariance: Optional[np.ndarray] = None
    param_names: tuple = ()
    reduced_chi2: float = math.nan
    residual_rms_db: float = math.nan
    converged: bool = False
    iterations: int = 0
    rank_deficient: bool = False
    at_bound: tuple = ()
    status: str = ""

    @property
    def cooperativity(self) -> float:
        return cooperativity_from_rates(self.g_eff, self.kappa, self.gamma)

    @property
    def kappa_c(self) -> float:
        """External coupling rate implied by the fitted peak height."""
        return self.kappa * 10.0 ** (self.amplitude_db / 20.0)

    def to_hybrid_model(self, B_a: float = 0.0) -> HybridModel:
        kc = min(self.kappa_c, self.kappa)
        res = ResonatorParams(omega_r=TWO_PI * self.f_r, kappa_c=TWO_PI * kc, kappa_i=TWO_PI * (self.kappa - kc))
        ens = SpinEnsembleParams(g_s=self.g_s, B_a=B_a, gamma=TWO_PI * self.gamma)
        return HybridModel(res, ens, g_eff=TWO_PI * self.g_eff, B_FMR=self.B_FMR)


def initial_full_guess(anticrossing: AnticrossingFit, trace: LinewidthTrace,
                       spectrum: Spectrum2D) -> FullModelFit:
    """Starting point for :func:`fit_full` from the branch fit and linewidth trace.

    ``kappa`` is half the far-detuned FWHM; ``gamma`` follows from the
    broadest usable line, whose width on resonance is ``kappa + gamma/2``.
    """
    far = trace.far_detuned_fwhm(anticrossing.B_FMR)
    kappa = 0.5 * far
    ok = trace.usable
    widest = float(np.max(trace.fwhms[ok]))
    gamma = max(2.0 * (widest - kappa), kappa)
    i = int(np.argmax(np.abs(spectrum.field_axis - anticrossing.B_FMR)))
    A = float(np.max(spectrum.power[i]))
    return FullModelFit(f_r=anticrossing.f_r, kappa=kappa, g_eff=anticrossing.g_eff, gamma=gamma,
                        g_s=anticrossing.g_s, B_FMR=anticrossing.B_FMR, amplitude_db=A, floor=0.0)


def noise_sigma_db(amplitude_sigma: float) -> float:
    """Standard deviation in dB of ``|1 + sigma n|`` amplitude noise, small-sigma limit."""
    return 20.0 / math.log(10.0) * amplitude_sigma


def fit_full(spectrum: Spectrum2D, initial: FullModelFit, settings: Optional[OptimizerSettings] = None,
             *, fit_floor: bool = True, noise_db: Optional[float] = None,
             field_stride: int = 1, freq_stride: int = 1) -> FullModelFit:
    """Fit the transmission model to the whole dB map.

    ``noise_db`` is the per-point dB noise used for the reduced chi-square;
    NaN is reported without it. The strides subsample the grid.
    """
    B = spectrum.field_axis[::field_stride]
    f = spectrum.freq_axis[::freq_stride]
    P = spectrum.power[::field_stride, ::freq_stride]
    BB, FF = np.meshgrid(B, f, indexing="ij")
    X = np.column_stack([BB.ravel(), FF.ravel()])
    reg = TransmissionMapRegressor(f_r=initial.f_r, kappa=initial.kappa, g_eff=initial.g_eff,
                                   gamma=initial.gamma, g_s=initial.g_s, B_FMR=initial.B_FMR,
                                   amplitude_db=initial.amplitude_db, floor=initial.floor,
                                   fit_floor=fit_floor, settings=settings)
    reg.fit(X, P.ravel())
    d = reg.diagnostics_
    n = len(reg.param_names_)
    dof = X.shape[0] - n
    chi2 = math.nan
    if noise_db and noise_db > 0:
        chi2 = 2.0 * d.cost / (noise_db ** 2 * dof)
    rates = {"kappa": reg.kappa_, "g_eff": reg.g_eff_, "gamma": reg.gamma_}
    at_bound = tuple(k for k, v in rates.items() if v <= 1e-6)  # below 1 uHz: pinned at zero
    if not d.converged:
        warnings.warn(f"full fit did not converge: {d.status}", RuntimeWarning, stacklevel=2)
    return FullModelFit(f_r=reg.f_r_, kappa=reg.kappa_, g_eff=reg.g_eff_, gamma=reg.gamma_, g_s=reg.g_s_,
                        B_FMR=reg.B_FMR_, amplitude_db=reg.amplitude_db_, floor=reg.floor_,
                        stderr={k: float(v) for k, v in reg.stderr_.items()}, covariance=reg.covariance_,
                        param_names=tuple(reg.param_names_), reduced_chi2=chi2,
                        residual_rms_db=reg.residual_rms_db_, converged=bool(d.converged),
                        iterations=d.iterations, rank_deficient=bool(d.rank_deficient),
                        at_bound=at_bound, status=d.status)


def detect_anticrossing(trace: LinewidthTrace, min_span_fwhm: float = 5.0) -> None:
    """Raise :class:`NoAnticrossingError` when the trace shows no avoided crossing.

    The usable slice centres must spread over more than ``min_span_fwhm``
    median line widths.
    """
    ok = trace.usable
    if ok.sum() < 6:
        raise NoAnticrossingError("fewer than 6 usable slices")
    c, w = trace.centers[ok], trace.fwhms[ok]
    if np.ptp(c) < min_span_fwhm * np.median(w):
        raise NoAnticrossingError("peak positions do not move with field")


__all__ = [
    "LorentzianFit", "TracePoint", "LinewidthTrace", "BranchPoint", "AnticrossingFit", "FullModelFit",
    "fit_peaks", "fit_slice", "linewidth_trace", "extract_branch_points", "guess_anticrossing",
    "fit_anticrossing", "initial_full_guess", "fit_full", "noise_sigma_db", "detect_anticrossing",
    "robust_noise", "GS_GRID",
]
