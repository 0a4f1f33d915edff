"""End-to-end analysis of a transmission map: slices, branch fit, full fit."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoAnticrossingError
from .fitting import (AnticrossingFit, FullModelFit, LinewidthTrace, detect_anticrossing,
                      extract_branch_points, fit_anticrossing, fit_full, initial_full_guess,
                      linewidth_trace, noise_sigma_db)
from .optimize import OptimizerSettings
from .spectrum import Spectrum2D


@dataclass
class AnalysisResult:
    trace: Optional[LinewidthTrace] = None
    branch_points: list = field(default_factory=list)
    anticrossing: Optional[AnticrossingFit] = None
    full: Optional[FullModelFit] = None
    anticrossing_detected: Optional[bool] = None
    message: str = ""


def _stated_noise(spectrum: Spectrum2D) -> Optional[dict]:
    try:
        noise = json.loads(spectrum.meta["scene"])["noise"]
        return {"sigma": float(noise.get("amplitude_sigma", 0.0)), "floor_db": noise.get("floor_db")}
    except (KeyError, ValueError, TypeError, AttributeError):
        return None


def stated_noise_db(spectrum: Spectrum2D) -> Optional[float]:
    """dB noise level recorded by the synthesizer in the spectrum metadata, if any."""
    noise = _stated_noise(spectrum)
    if noise is None or not noise["sigma"] > 0:
        return None
    return noise_sigma_db(noise["sigma"])


def stated_floor(spectrum: Spectrum2D) -> bool:
    """False only when the metadata says no power floor was added."""
    noise = _stated_noise(spectrum)
    return noise is None or noise["floor_db"] is not None


def analyze_spectrum(spectrum: Spectrum2D, *, anticrossing: bool = True, full: bool = True,
                     settings: Optional[OptimizerSettings] = None, threads: int = 1,
                     noise_db: Optional[float] = None) -> AnalysisResult:
    """Run the slice trace and, optionally, the branch and full-map fits.

    The full fit needs the branch fit for its starting point, so
    ``full=True`` implies ``anticrossing=True``. If the trace shows no
    avoided crossing, or the branch fit cannot separate ``g_eff`` from zero
    (rank deficient, below three standard errors, or a splitting ``2 g_eff``
    narrower than the median slice line width), the later stages are
    skipped and ``anticrossing_detected`` is False. The power-floor
    parameter is fitted unless the metadata of a synthetic map says no
    floor was added.
    """
    result = AnalysisResult()
    result.trace = linewidth_trace(spectrum, settings, threads=threads)
    if not (anticrossing or full):
        return result
    try:
        detect_anticrossing(result.trace)
        result.branch_points = extract_branch_points(result.trace)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ac = fit_anticrossing(result.branch_points, settings=settings)
        if ac.rank_deficient or not ac.g_eff > 3.0 * ac.stderr.get("g_eff", 0.0):
            raise NoAnticrossingError("coupling not distinguishable from zero")
        # the stderr collapses as g_eff -> 0, so also demand a splitting wider than a line
        width = float(np.median(result.trace.fwhms[result.trace.usable]))
        if not 2.0 * ac.g_eff > width:
            raise NoAnticrossingError("splitting narrower than the line width")
    except NoAnticrossingError as exc:
        result.anticrossing_detected = False
        result.message = f"no anticrossing detected ({exc})"
        return result
    result.anticrossing = ac
    result.anticrossing_detected = True
    if full:
        guess = initial_full_guess(ac, result.trace, spectrum)
        if noise_db is None:
            noise_db = stated_noise_db(spectrum)
        result.full = fit_full(spectrum, guess, settings, noise_db=noise_db, fit_floor=stated_floor(spectrum))
    return result
