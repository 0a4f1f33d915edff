"""Synthetic field-frequency transmission maps.

A scene is one hybridised resonator, optional
uncoupled bystander resonators sharing the feedline, and an optional broad
box mode weakly coupled to the same spin ensemble. Complex amplitudes of all
contributions are summed before taking ``|S21|**2``.

Noise is applied to the linear amplitude as ``|S21| * |1 + sigma * n|`` with
``n`` standard normal, plus an optional exponentially distributed power floor
whose mean is ``floor_db``. Every field row draws from its own Philox stream
keyed by ``(seed, row)``, so the output does not depend on how rows are split
across threads.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .constants import CODATA2018, PhysicalConstants, TWO_PI
from .errors import ConfigError, DimensionError
from .physics import HybridModel, ResonatorParams, SpinEnsembleParams, resonance_field, s21
from .spectrum import Spectrum2D

MAX_GRID_POINTS = 2 ** 24
_TINY_POWER = 1e-30  # -300 dB; keeps every dB value finite


@dataclass(frozen=True)
class Grid:
    """Uniform axis in SI units (T or Hz)."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0 or not self.stop > self.start:
            raise ValueError("grid must be strictly increasing (stop > start, step > 0)")
        n = (self.stop - self.start) / self.step
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError("(stop - start) must be a whole number of steps")

    @property
    def size(self) -> int:
        return int(round((self.stop - self.start) / self.step)) + 1

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.size)


@dataclass(frozen=True)
class Bystander:
    """Uncoupled resonator whose frequency drifts as ``w0 (1 - c1 B - c2 B**2)``."""

    resonator: ResonatorParams
    shift_linear: float = 0.0  # 1/T
    shift_quadratic: float = 0.0  # 1/T^2

    def omega(self, B):
        B = np.asarray(B, dtype=float)
        return self.resonator.omega_r * (1.0 - self.shift_linear * B - self.shift_quadratic * B ** 2)


@dataclass(frozen=True)
class BoxMode:
    resonator: ResonatorParams
    g_eff: float


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    amplitude_sigma: float = 0.0
    floor_db: Optional[float] = None

    def __post_init__(self):
        if self.amplitude_sigma < 0:
            raise ValueError("amplitude_sigma must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def row_rng(self, row: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(self.seed), int(row)])))


@dataclass(frozen=True)
class SceneConfig:
    hybrid: HybridModel
    field_grid: Grid
    freq_grid: Grid
    bystanders: tuple = ()
    box_mode: Optional[BoxMode] = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.field_grid.size < 2 or self.freq_grid.size < 2:
            raise ValueError("grids need at least two points")
        w_r = self.hybrid.resonator.omega_r
        for b in self.bystanders:
            if abs(b.resonator.omega_r - w_r) <= 10 * b.resonator.kappa:
                warnings.warn("bystander resonator lies within 10 linewidths of the hybrid resonator",
                              stacklevel=3)

    def with_seed(self, seed: int) -> "SceneConfig":
        noise = NoiseConfig(seed=seed, amplitude_sigma=self.noise.amplitude_sigma, floor_db=self.noise.floor_db)
        return SceneConfig(self.hybrid, self.field_grid, self.freq_grid, self.bystanders, self.box_mode, noise)

    def with_noise(self, noise: NoiseConfig) -> "SceneConfig":
        return SceneConfig(self.hybrid, self.field_grid, self.freq_grid, self.bystanders, self.box_mode, noise)

    def to_dict(self) -> dict:
        return scene_to_dict(self)


def _box_model(scene: SceneConfig, c: PhysicalConstants) -> Optional[HybridModel]:
    if scene.box_mode is None:
        return None
    return HybridModel.from_parameters(scene.box_mode.resonator, scene.hybrid.ensemble, scene.box_mode.g_eff, c)


def clean_amplitude(scene: SceneConfig, B, omega, c: PhysicalConstants = CODATA2018):
    """Noise-free complex feedline transmission on a broadcastable (B, omega) grid."""
    total = s21(scene.hybrid, B, omega, c)
    for b in scene.bystanders:
        total = total + b.resonator.kappa_c / (1j * (omega - b.omega(B)) - b.resonator.kappa)
    box = _box_model(scene, c)
    if box is not None:
        total = total + s21(box, B, omega, c)
    return total


def _rows(scene, fields, omegas, lo, hi, c):
    amp = np.abs(clean_amplitude(scene, fields[lo:hi, None], omegas[None, :], c))
    noise = scene.noise
    if noise.amplitude_sigma == 0 and noise.floor_db is None:
        power = amp ** 2
    else:
        power = np.empty_like(amp)
        floor = None if noise.floor_db is None else 10.0 ** (noise.floor_db / 10.0)
        for k, i in enumerate(range(lo, hi)):
            rng = noise.row_rng(i)
            a = amp[k] * np.abs(1.0 + noise.amplitude_sigma * rng.standard_normal(omegas.size))
            p = a ** 2
            if floor is not None:
                p = p + floor * rng.standard_exponential(omegas.size)
            power[k] = p
    return 10.0 * np.log10(np.maximum(power, _TINY_POWER))


def synthesize(scene: SceneConfig, threads: int = 1, c: PhysicalConstants = CODATA2018,
               max_points: int = MAX_GRID_POINTS) -> Spectrum2D:
    """Render the scene to a dB transmission map.

    Raises
    ------
    DimensionError
        If the grid holds more than ``max_points`` samples (default 2**24).
    """
    fields = scene.field_grid.values()
    freqs = scene.freq_grid.values()
    if fields.size * freqs.size > max_points:
        raise DimensionError(f"grid of {fields.size} x {freqs.size} exceeds {max_points} points")
    omegas = TWO_PI * freqs
    n = fields.size
    if threads <= 1:
        power = _rows(scene, fields, omegas, 0, n, c)
    else:
        bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda lh: _rows(scene, fields, omegas, lh[0], lh[1], c),
                                  zip(bounds[:-1], bounds[1:])))
        power = np.vstack(parts)
    meta = {
        "generator": f"magnon-cavity-lab {__version__}",
        "source": "synthetic",
        "scene": json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":")),
    }
    return Spectrum2D(fields, freqs, power, meta)


# --- JSON boundary (GHz, MHz, mT) -----------------------------------------

_HYBRID_KEYS = {"f_r_GHz", "kappa_c_MHz", "kappa_i_MHz", "g_eff_MHz", "gamma_MHz", "g_s",
                "B_a_mT", "B_FMR_mT", "mode_volume_m3"}
_TOP_KEYS = {"hybrid", "bystanders", "box_mode", "field_grid_mT", "freq_grid_GHz", "noise"}


def _num(d, key, path, default=None, required=True):
    if key not in d:
        if required and default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    for k in d:
        if k not in allowed and not k.startswith("_"):
            raise ConfigError(f"{path}.{k}", "unknown key")


def _grid(d, path, scale):
    _check_keys(d, {"start", "stop", "step"}, path)
    try:
        return Grid(_num(d, "start", path) * scale, _num(d, "stop", path) * scale, _num(d, "step", path) * scale)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


def _resonator(d, path, mhz=TWO_PI * 1e6):
    return ResonatorParams(
        omega_r=_num(d, "f_r_GHz", path) * TWO_PI * 1e9,
        kappa_c=_num(d, "kappa_c_MHz", path) * mhz,
        kappa_i=_num(d, "kappa_i_MHz", path) * mhz,
        mode_volume=_num(d, "mode_volume_m3", path, required=False),
    )


def scene_from_dict(doc: dict, c: PhysicalConstants = CODATA2018) -> SceneConfig:
    """Build a scene from its JSON document; errors name the offending key."""
    _check_keys(doc, _TOP_KEYS | {"notes", "source"}, "scene")
    for key in ("hybrid", "field_grid_mT", "freq_grid_GHz"):
        if key not in doc:
            raise ConfigError(key, "missing required key")
    h = doc["hybrid"]
    _check_keys(h, _HYBRID_KEYS, "hybrid")
    mhz = TWO_PI * 1e6
    try:
        res = _resonator(h, "hybrid")
        g_s = _num(h, "g_s", "hybrid")
        gamma = _num(h, "gamma_MHz", "hybrid") * mhz
        g_eff = _num(h, "g_eff_MHz", "hybrid") * mhz
        if "B_a_mT" in h:
            ens = SpinEnsembleParams(g_s=g_s, B_a=_num(h, "B_a_mT", "hybrid") / 1e3, gamma=gamma)
            hybrid = HybridModel.from_parameters(res, ens, g_eff, c)
            if "B_FMR_mT" in h:
                raise ConfigError("hybrid.B_FMR_mT", "give either B_a_mT or B_FMR_mT, not both")
        elif "B_FMR_mT" in h:
            B_FMR = _num(h, "B_FMR_mT", "hybrid") / 1e3
            bare = resonance_field(SpinEnsembleParams(g_s=g_s), res.omega_r, c)
            ens = SpinEnsembleParams(g_s=g_s, B_a=bare - B_FMR, gamma=gamma)
            hybrid = HybridModel(res, ens, g_eff, B_FMR)
        else:
            raise ConfigError("hybrid.B_a_mT", "missing required key (or give B_FMR_mT)")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("hybrid", str(exc)) from None

    bystanders = []
    for k, b in enumerate(doc.get("bystanders") or []):
        path = f"bystanders[{k}]"
        _check_keys(b, {"f_r_GHz", "kappa_c_MHz", "kappa_i_MHz", "shift_linear_per_T", "shift_quadratic_per_T2"}, path)
        try:
            bystanders.append(Bystander(_resonator(b, path),
                                        _num(b, "shift_linear_per_T", path, 0.0, required=False),
                                        _num(b, "shift_quadratic_per_T2", path, 0.0, required=False)))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    box = None
    if doc.get("box_mode") is not None:
        b = doc["box_mode"]
        _check_keys(b, {"f_r_GHz", "kappa_c_MHz", "kappa_i_MHz", "g_eff_MHz"}, "box_mode")
        try:
            box = BoxMode(_resonator(b, "box_mode"), _num(b, "g_eff_MHz", "box_mode") * mhz)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("box_mode", str(exc)) from None

    noise_doc = doc.get("noise") or {}
    _check_keys(noise_doc, {"seed", "amplitude_sigma", "floor_db"}, "noise")
    seed = noise_doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("noise.seed", f"expected an integer, got {seed!r}")
    floor = noise_doc.get("floor_db")
    try:
        noise = NoiseConfig(seed=seed,
                            amplitude_sigma=_num(noise_doc, "amplitude_sigma", "noise", 0.0, required=False),
                            floor_db=None if floor is None else _num(noise_doc, "floor_db", "noise"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from None

    try:
        return SceneConfig(hybrid=hybrid,
                           field_grid=_grid(doc["field_grid_mT"], "field_grid_mT", 1e-3),
                           freq_grid=_grid(doc["freq_grid_GHz"], "freq_grid_GHz", 1e9),
                           bystanders=tuple(bystanders), box_mode=box, noise=noise)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("scene", str(exc)) from None


def load_scene(path, c: PhysicalConstants = CODATA2018) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("scene", f"invalid JSON: {exc}") from None
    return scene_from_dict(doc, c)


def _res_dict(r: ResonatorParams) -> dict:
    d = {"f_r_GHz": r.omega_r / TWO_PI / 1e9, "kappa_c_MHz": r.kappa_c / TWO_PI / 1e6,
         "kappa_i_MHz": r.kappa_i / TWO_PI / 1e6}
    if r.mode_volume is not None:
        d["mode_volume_m3"] = r.mode_volume
    return d


def scene_to_dict(scene: SceneConfig) -> dict:
    h = scene.hybrid
    hybrid = _res_dict(h.resonator)
    hybrid.update(g_eff_MHz=h.g_eff / TWO_PI / 1e6, gamma_MHz=h.ensemble.gamma / TWO_PI / 1e6,
                  g_s=h.ensemble.g_s, B_a_mT=h.ensemble.B_a * 1e3)
    doc = {
        "hybrid": hybrid,
        "bystanders": [dict(_res_dict(b.resonator), shift_linear_per_T=b.shift_linear,
                            shift_quadratic_per_T2=b.shift_quadratic) for b in scene.bystanders],
        "box_mode": None if scene.box_mode is None else dict(
            _res_dict(scene.box_mode.resonator), g_eff_MHz=scene.box_mode.g_eff / TWO_PI / 1e6),
        "field_grid_mT": {"start": scene.field_grid.start * 1e3, "stop": scene.field_grid.stop * 1e3,
                          "step": scene.field_grid.step * 1e3},
        "freq_grid_GHz": {"start": scene.freq_grid.start / 1e9, "stop": scene.freq_grid.stop / 1e9,
                          "step": scene.freq_grid.step / 1e9},
        "noise": {"seed": scene.noise.seed, "amplitude_sigma": scene.noise.amplitude_sigma,
                  "floor_db": scene.noise.floor_db},
    }
    return doc
