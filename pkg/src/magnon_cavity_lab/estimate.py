"""Order-of-magnitude coupling estimates from sample geometry."""
from __future__ import annotations

import json

from .constants import CODATA2018, TWO_PI, PhysicalConstants
from .errors import ConfigError
from .physics import (ResonatorParams, SpinEnsembleParams, enhanced_coupling, mode_volume_from_coupling,
                      single_spin_coupling, spin_count_from_geometry, thermal_occupancy, vacuum_field,
                      vacuum_field_from_coupling, yig_spin_density)

_TOP_KEYS = {"geometry", "spin_density_cm3", "unit_cell", "N", "resonator", "single_spin_g_Hz",
             "mode_volume_m3", "g_s", "temperature_K", "measured_g_eff_MHz"}


def _number(d, key, path):
    if key not in d:
        raise ConfigError(path + key, "missing required value")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path + key, f"expected a number, got {v!r}")
    if not v > 0:
        raise ConfigError(path + key, "must be positive")
    return float(v)


def _spin_count(doc) -> tuple[float, float | None]:
    if "N" in doc:
        return _number(doc, "N", ""), None
    if "geometry" not in doc:
        raise ConfigError("geometry", "missing; give geometry or N")
    geo = doc["geometry"]
    if not isinstance(geo, dict):
        raise ConfigError("geometry", "expected an object")
    L = _number(geo, "overlap_length_mm", "geometry.") * 1e-3
    w = _number(geo, "track_width_um", "geometry.") * 1e-6
    d = _number(geo, "field_depth_um", "geometry.") * 1e-6
    if "spin_density_cm3" in doc:
        rho = _number(doc, "spin_density_cm3", "") * 1e6
    elif "unit_cell" in doc:
        cell = doc["unit_cell"]
        rho = yig_spin_density(_number(cell, "spins_per_cell", "unit_cell."),
                               _number(cell, "cell_volume_nm3", "unit_cell.") * 1e-27)
    else:
        raise ConfigError("spin_density_cm3", "missing; give spin_density_cm3 or unit_cell")
    return spin_count_from_geometry(L, w, d, rho), rho


def estimate(doc: dict, c: PhysicalConstants = CODATA2018) -> dict:
    """Spin count, single-spin and collective coupling, vacuum field and thermal photons.

    Returns a flat dict in boundary units (Hz for ``g``, MHz for ``g_eff``,
    tesla, m^3). ``comparison`` is set when a measured coupling is given:
    ``"within factor 2"`` or ``"outside factor 2"``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    unknown = sorted(k for k in doc if k not in _TOP_KEYS and not k.startswith("_") and k not in ("notes", "source"))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    N, rho = _spin_count(doc)
    if "resonator" not in doc or not isinstance(doc["resonator"], dict):
        raise ConfigError("resonator", "missing resonator block")
    f_r = _number(doc["resonator"], "f_r_GHz", "resonator.") * 1e9
    omega_r = TWO_PI * f_r
    g_s = _number(doc, "g_s", "") if "g_s" in doc else 2.0
    if "single_spin_g_Hz" in doc:
        g = TWO_PI * _number(doc, "single_spin_g_Hz", "")
        B10 = vacuum_field_from_coupling(g, g_s, c)
        V_m = mode_volume_from_coupling(g, g_s, omega_r, c)
    elif "mode_volume_m3" in doc:
        V_m = _number(doc, "mode_volume_m3", "")
        res = ResonatorParams(omega_r=omega_r, kappa_c=0.0, kappa_i=0.0, mode_volume=V_m)
        B10 = vacuum_field(res, c)
        g = single_spin_coupling(res, SpinEnsembleParams(g_s=g_s), c)
    else:
        raise ConfigError("single_spin_g_Hz", "missing; give single_spin_g_Hz or mode_volume_m3")
    g_eff = enhanced_coupling(g, N)
    out = {
        "N": N,
        "spin_density_m3": rho,
        "g_Hz": g / TWO_PI,
        "g_eff_MHz": g_eff / TWO_PI / 1e6,
        "vacuum_field_T": B10,
        "mode_volume_m3": V_m,
        "f_r_GHz": f_r / 1e9,
        "g_s": g_s,
    }
    if "temperature_K" in doc:
        T = _number(doc, "temperature_K", "")
        out["temperature_K"] = T
        out["thermal_photons"] = thermal_occupancy(T, omega_r, c)
    if "measured_g_eff_MHz" in doc:
        meas = _number(doc, "measured_g_eff_MHz", "")
        ratio = out["g_eff_MHz"] / meas
        out["measured_g_eff_MHz"] = meas
        out["ratio_to_measured"] = ratio
        out["comparison"] = "within factor 2" if 0.5 <= ratio <= 2.0 else "outside factor 2"
    return out


def load_estimate_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None


def format_estimate(out: dict) -> str:
    lines = [
        f"N                 {out['N']:.4g}",
        f"g/2pi             {out['g_Hz']:.4g} Hz",
        f"g_eff/2pi         {out['g_eff_MHz']:.5g} MHz",
        f"B_1,0             {out['vacuum_field_T']:.4g} T",
        f"V_m               {out['mode_volume_m3']:.4g} m^3",
    ]
    if "thermal_photons" in out:
        lines.append(f"thermal photons   {out['thermal_photons']:.4g} at {out['temperature_K']:g} K")
    if "comparison" in out:
        lines.append(f"measured g_eff    {out['measured_g_eff_MHz']:g} MHz; prediction "
                     f"{out['ratio_to_measured']:.3g}x ({out['comparison']})")
    return "\n".join(lines)


__all__ = ["estimate", "load_estimate_config", "format_estimate"]
