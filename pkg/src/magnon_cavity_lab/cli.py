"""Command-line front end.

Boundary units: frequencies in GHz, rates in MHz, fields in mT and the
single-spin coupling in Hz.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error (missing
or malformed input, unwritable output), 3 a fit did not converge.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
import warnings
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DimensionError, SpectrumFormatError
from .estimate import estimate, format_estimate, load_estimate_config
from .ladder import DEFAULT_MAX_DIM, single_excitation_branches, splitting_vs_excitation
from .pipeline import analyze_spectrum
from .report import (anticrossing_report, full_report, summary_table, write_branch_csv, write_json,
                     write_trace_csv)
from .spectrum import read_spectrum, write_spectrum
from .synth import NoiseConfig, load_scene, scene_to_dict, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NONCONVERGED = 0, 1, 2, 3
TOOL = "magnon-cavity-lab"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def bundled_config(name: str) -> Path | None:
    """Path of a config shipped with the package, or None."""
    ref = resources.files("magnon_cavity_lab") / "data" / name
    return Path(str(ref)) if ref.is_file() else None


def _resolve_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    b = bundled_config(p.name)
    if b is None:
        raise FileNotFoundError(f"config not found: {path}")
    return b


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects what a manifest needs while a subcommand runs."""

    def __init__(self, args, subcommand: str):
        self.args = args
        self.subcommand = subcommand
        self.out_dir = Path(args.output_dir)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.config = None
        self.seeds: dict = {}
        self.started = datetime.now(timezone.utc)
        self.t0 = time.perf_counter()

    def out(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.outputs.append(p)
        return p

    def write_manifest(self, status: int) -> None:
        doc = {
            "tool": TOOL,
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.outputs if p.exists()],
            "seeds": self.seeds,
            "exit_code": status,
            "started": self.started.isoformat(),
            "duration_s": round(time.perf_counter() - self.t0, 6),
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(doc, self.out_dir / "manifest.json")


# --- plots ----------------------------------------------------------------------

def _plot_spectrum(spec, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(spec.field_axis * 1e3, spec.freq_axis * 1e-9, spec.power.T, shading="nearest",
                         rasterized=True)
    fig.colorbar(mesh, ax=ax, label="|S21|^2 (dB)")
    ax.set_xlabel("field (mT)")
    ax.set_ylabel("frequency (GHz)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_trace(trace, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = trace.usable
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(trace.fields[ok] * 1e3, trace.fwhms[ok] * 1e-6, "o", ms=3)
    ax.set_xlabel("field (mT)")
    ax.set_ylabel("FWHM (MHz)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- subcommands -----------------------------------------------------------------

def cmd_simulate(args, run: Run) -> int:
    cfg = _resolve_config(args.config)
    run.inputs.append(cfg)
    scene = load_scene(cfg)
    if args.seed is not None:
        scene = scene.with_noise(NoiseConfig(seed=args.seed, amplitude_sigma=scene.noise.amplitude_sigma,
                                             floor_db=scene.noise.floor_db))
    run.config = scene_to_dict(scene)
    run.seeds = {"noise": scene.noise.seed}
    spec = synthesize(scene, threads=args.threads)
    write_spectrum(spec, run.out(args.out))
    if args.plot:
        _plot_spectrum(spec, run.out(Path(args.out).stem + ".svg"))
    print(f"wrote {run.out_dir / args.out} ({spec.shape[0]} fields x {spec.shape[1]} frequencies)")
    return EXIT_OK


def cmd_analyze(args, run: Run) -> int:
    path = Path(args.spectrum)
    spec = read_spectrum(path)
    run.inputs.append(path)
    want_full = args.full or not (args.slices or args.anticrossing)
    want_ac = args.anticrossing or want_full
    run.config = {"slices": True, "anticrossing": want_ac, "full": want_full}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = analyze_spectrum(spec, anticrossing=want_ac, full=want_full, threads=args.threads)
    write_trace_csv(res.trace, run.out("linewidth_trace.csv"))
    if args.plot:
        _plot_trace(res.trace, run.out("linewidth_trace.svg"))
    status = EXIT_OK
    if res.anticrossing_detected is False:
        print(res.message)
        return status
    if res.anticrossing is not None:
        write_branch_csv(res.branch_points, run.out("branch_points.csv"))
        write_json(anticrossing_report(res.anticrossing), run.out("anticrossing_fit.json"))
        if not res.anticrossing.converged:
            status = EXIT_NONCONVERGED
    if res.full is not None:
        write_json(full_report(res.full), run.out("full_fit.json"))
        if not res.full.converged:
            status = EXIT_NONCONVERGED
    if want_ac:
        print(summary_table(res.full, res.anticrossing))
    else:
        ok = res.trace.usable
        print(f"{ok.sum()} of {len(res.trace)} slices fitted; far-detuned FWHM "
              f"{res.trace.far_detuned_fwhm() * 1e-6:.4g} MHz" if ok.any() else "no usable slices")
    if status == EXIT_NONCONVERGED:
        print("warning: a fit did not converge", file=sys.stderr)
    return status


def cmd_estimate(args, run: Run) -> int:
    cfg = _resolve_config(args.config)
    run.inputs.append(cfg)
    doc = load_estimate_config(cfg)
    run.config = doc
    out = estimate(doc)
    write_json({k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in out.items()},
               run.out("estimate.json"))
    print(format_estimate(out))
    return EXIT_OK


def _detuning_grid(text: str) -> np.ndarray:
    try:
        start, stop, n = text.split(":")
        return np.linspace(float(start), float(stop), int(n))
    except ValueError:
        raise ConfigError("--detuning-MHz", "expected START:STOP:COUNT") from None


def cmd_ladder(args, run: Run) -> int:
    if args.N < 1:
        raise ConfigError("--N", "must be at least 1")
    if args.E_max < 1:
        raise ConfigError("--E-max", "must be at least 1")
    if args.g_Hz < 0:
        raise ConfigError("--g-Hz", "must be non-negative")
    run.config = {"N": args.N, "E_max": args.E_max, "g_Hz": args.g_Hz, "f_r_GHz": args.f_r_GHz,
                  "detuning_MHz": args.detuning_MHz, "max_dim": args.max_dim}
    two_pi = 2.0 * math.pi
    d_mhz = _detuning_grid(args.detuning_MHz)
    g = two_pi * args.g_Hz
    w_r = two_pi * args.f_r_GHz * 1e9
    levels = single_excitation_branches(args.N, g, w_r, two_pi * d_mhz * 1e6)
    # closed-form normal modes for comparison
    d = two_pi * d_mhz * 1e6
    R = np.hypot(d, 2.0 * g * math.sqrt(args.N))
    upper = w_r + d / 2 + R / 2
    lower = w_r + d / 2 - R / 2
    with open(run.out("ladder_branches.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("detuning_MHz,lower_GHz,upper_GHz,closed_form_lower_GHz,closed_form_upper_GHz\n")
        for k in range(d_mhz.size):
            vals = (d_mhz[k], levels[k, 0] / two_pi / 1e9, levels[k, 1] / two_pi / 1e9,
                    lower[k] / two_pi / 1e9, upper[k] / two_pi / 1e9)
            fh.write(",".join(format(v, ".17g") for v in vals) + "\n")
    with open(run.out("ladder_splitting.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("E,normalized_splitting\n")
        if g > 0:
            for E, r in splitting_vs_excitation(args.N, g, args.E_max, max_dim=args.max_dim):
                fh.write(f"{E},{r:.17g}\n")
        else:
            for E in range(1, args.E_max + 1):
                fh.write(f"{E},nan\n")
    print(f"wrote {d_mhz.size} detuning points and {args.E_max} excitation blocks to {run.out_dir}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="noise seed; overrides the config value (simulate)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    common.add_argument("--output-dir", default=argparse.SUPPRESS, help="directory for outputs (default .)")
    common.add_argument("--format", choices=["csv"], default=argparse.SUPPRESS, help="data file format")
    common.add_argument("--plot", action="store_true", default=argparse.SUPPRESS,
                        help="also write SVG plots")

    p = _Parser(prog="magnon-cavity-lab", parents=[common],
                description="Simulate and fit ferrimagnet-resonator transmission spectra. Units: GHz for "
                            "frequencies, MHz for rates, mT for fields, Hz for the single-spin coupling.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="synthesize a transmission map from a scene config")
    s.add_argument("config", help="scene JSON (bundled: paper-fig3c.json, paper-fig2.json)")
    s.add_argument("-o", "--out", default="spectrum.csv", help="spectrum file name inside --output-dir")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common], help="fit a spectrum file (all stages by default)")
    a.add_argument("spectrum")
    a.add_argument("--slices", action="store_true", help="linewidth trace only")
    a.add_argument("--anticrossing", action="store_true", help="trace and branch fit")
    a.add_argument("--full", action="store_true", help="trace, branch fit and full-map fit")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("estimate", parents=[common], help="coupling estimate from geometry (bundled: "
                                                         "paper-estimate.json)")
    e.add_argument("config")
    e.set_defaults(func=cmd_estimate)

    ld = sub.add_parser("ladder", parents=[common], help="exact macrospin-photon spectra")
    ld.add_argument("--N", type=float, required=True, help="number of spins")
    ld.add_argument("--E-max", dest="E_max", type=int, default=1, help="largest excitation number")
    ld.add_argument("--g-Hz", dest="g_Hz", type=float, required=True, help="single-spin coupling g/2pi (Hz)")
    ld.add_argument("--f-r-GHz", dest="f_r_GHz", type=float, default=5.9, help="resonator frequency (GHz)")
    ld.add_argument("--detuning-MHz", dest="detuning_MHz", default="-2000:2000:101",
                    help="START:STOP:COUNT detuning grid in MHz")
    ld.add_argument("--max-dim", dest="max_dim", type=int, default=DEFAULT_MAX_DIM,
                    help="largest block dimension to diagonalise")
    ld.set_defaults(func=cmd_ladder)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    for name, default in (("seed", None), ("threads", 1), ("output_dir", "."), ("format", "csv"),
                          ("plot", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args, args.command)
    try:
        status = args.func(args, run)
    except (ConfigError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except (OSError, SpectrumFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    try:
        run.write_manifest(status)
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
