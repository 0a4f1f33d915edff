"""Fit reports (JSON) and trace exports (CSV) in boundary units."""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .fitting import AnticrossingFit, FullModelFit, LinewidthTrace

SCHEMA = "fit-report v1"
TRACE_COLUMNS = ("field_mT", "center_GHz", "fwhm_MHz", "flag")

# name -> (unit, factor from SI)
_UNITS = {
    "f_r": ("GHz", 1e-9),
    "kappa": ("MHz", 1e-6),
    "g_eff": ("MHz", 1e-6),
    "gamma": ("MHz", 1e-6),
    "g_s": ("", 1.0),
    "B_FMR": ("mT", 1e3),
    "amplitude_db": ("dB", 1.0),
    "floor": ("", 1.0),
}


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _param_block(values: dict, stderr: dict) -> dict:
    out = {}
    for name, v in values.items():
        unit, k = _UNITS[name]
        err = stderr.get(name)
        out[name] = {"value": _num(v * k), "stderr": None if err is None else _num(err * k), "unit": unit}
    return out


def _cov_block(cov, names) -> dict:
    k = np.array([_UNITS[n][1] for n in names])
    scaled = np.asarray(cov) * np.outer(k, k)
    return {"names": list(names), "units": [_UNITS[n][0] for n in names],
            "matrix": [[_num(v) for v in row] for row in scaled]}


def anticrossing_report(fit: AnticrossingFit) -> dict:
    values = {"g_eff": fit.g_eff, "B_FMR": fit.B_FMR, "g_s": fit.g_s, "f_r": fit.f_r}
    rep = {
        "schema": SCHEMA,
        "model": "anticrossing",
        "parameters": _param_block(values, fit.stderr),
        "covariance": _cov_block(fit.covariance, list(values)) if fit.covariance is not None else None,
        "diagnostics": {"converged": fit.converged, "iterations": fit.iterations,
                        "rank_deficient": fit.rank_deficient, "n_points": fit.n_points,
                        "residual_rms_MHz": _num(fit.residual_rms * 1e-6)},
    }
    return rep


def full_report(fit: FullModelFit) -> dict:
    names = fit.param_names or ("f_r", "kappa", "g_eff", "gamma", "g_s", "B_FMR", "amplitude_db", "floor")
    values = {n: getattr(fit, n) for n in names}
    try:
        coop = _num(fit.cooperativity)
    except ValueError:
        coop = None
    return {
        "schema": SCHEMA,
        "model": "transmission",
        "parameters": _param_block(values, fit.stderr),
        "covariance": _cov_block(fit.covariance, names) if fit.covariance is not None else None,
        "cooperativity": coop,
        "diagnostics": {"converged": fit.converged, "status": fit.status, "iterations": fit.iterations,
                        "rank_deficient": fit.rank_deficient, "at_bound": list(fit.at_bound),
                        "reduced_chi2": _num(fit.reduced_chi2),
                        "residual_rms_dB": _num(fit.residual_rms_db)},
    }


def write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else format(v, ".12g")


def write_trace_csv(trace: LinewidthTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for p in trace:
            w.writerow([_fmt(p.field * 1e3), _fmt(p.center * 1e-9), _fmt(p.fwhm * 1e-6), p.flag])


def write_branch_csv(points, path) -> None:
    """Branch points with ``fwhm_MHz`` left as nan and the flag set to the branch label."""
    names = {1: "upper", -1: "lower", 0: "auto"}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for b, f, label in points:
            w.writerow([_fmt(b * 1e3), _fmt(f * 1e-9), "nan", names[int(label)]])


def read_trace_csv(path) -> list[tuple[float, float, float, str]]:
    """Rows of a trace CSV in SI units (T, Hz, Hz, flag)."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        return [(float(b) * 1e-3, float(c) * 1e9, float(w) * 1e6, flag) for b, c, w, flag in r]


def summary_table(full: FullModelFit | None, ac: AnticrossingFit | None) -> str:
    rows = []
    if full is not None:
        e = full.stderr
        rows += [
            ("g_eff/2pi", full.g_eff * 1e-6, e.get("g_eff", math.nan) * 1e-6, "MHz"),
            ("gamma/2pi", full.gamma * 1e-6, e.get("gamma", math.nan) * 1e-6, "MHz"),
            ("kappa/2pi", full.kappa * 1e-6, e.get("kappa", math.nan) * 1e-6, "MHz"),
            ("g_s", full.g_s, e.get("g_s", math.nan), ""),
            ("B_FMR", full.B_FMR * 1e3, e.get("B_FMR", math.nan) * 1e3, "mT"),
            ("f_r", full.f_r * 1e-9, e.get("f_r", math.nan) * 1e-9, "GHz"),
        ]
        try:
            rows.append(("C", full.cooperativity, math.nan, ""))
        except ValueError:
            rows.append(("C", math.nan, math.nan, ""))
    elif ac is not None:
        e = ac.stderr
        rows += [
            ("g_eff/2pi", ac.g_eff * 1e-6, e.get("g_eff", math.nan) * 1e-6, "MHz"),
            ("g_s", ac.g_s, e.get("g_s", math.nan), ""),
            ("B_FMR", ac.B_FMR * 1e3, e.get("B_FMR", math.nan) * 1e3, "mT"),
            ("f_r", ac.f_r * 1e-9, e.get("f_r", math.nan) * 1e-9, "GHz"),
        ]
    lines = [f"{'parameter':<10} {'value':>14} {'1-sigma':>12}  unit"]
    for name, v, err, unit in rows:
        err_s = "" if not math.isfinite(err) else f"{err:12.4g}"
        lines.append(f"{name:<10} {v:14.6g} {err_s:>12}  {unit}")
    return "\n".join(lines)
