"""Acceptance criteria 1-9, each printed as one PASS/FAIL line at the end of the run."""
import math
import time
import warnings

import numpy as np
import pytest
from scipy.linalg import eigvalsh

from magnon_cavity_lab.cli import bundled_config
from magnon_cavity_lab.constants import CODATA2018, TWO_PI
from magnon_cavity_lab.fitting import linewidth_trace
from magnon_cavity_lab.ladder import (build_hamiltonian, central_gap, single_excitation_branches,
                                      splitting_vs_excitation, vacuum_rabi_splitting)
from magnon_cavity_lab.models import (branch_frequencies_ghz, branch_jacobian_ghz, lorentzian,
                                      lorentzian_jacobian, transmission_jacobian)
from magnon_cavity_lab.optimize import central_difference_jacobian, least_squares
from magnon_cavity_lab.physics import (SpinEnsembleParams, cooperativity_from_rates, enhanced_coupling,
                                       resonance_field, spin_count_from_geometry)
from magnon_cavity_lab.pipeline import analyze_spectrum
from magnon_cavity_lab.synth import NoiseConfig, load_scene, synthesize

from test_models import rel_cols, transmission_jacobian_mp

RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def scene():
    return load_scene(bundled_config("paper-fig3c.json"))


def test_criterion_1_resonance_fields():
    w = TWO_PI * 5.90e9
    bare = resonance_field(SpinEnsembleParams(g_s=2.17), w)
    b_fmr = resonance_field(SpinEnsembleParams(g_s=2.17, B_a=0.024), w)
    ok = abs(bare * 1e3 - 194) <= 1 and abs(b_fmr * 1e3 - 170) <= 1
    record(1, ok, f"bare field {bare * 1e3:.2f} mT, B_FMR {b_fmr * 1e3:.2f} mT")


def test_criterion_2_cooperativity():
    c = cooperativity_from_rates(450e6, 3e6, 50e6)
    record(2, float(f"{c:.3g}") == 1350.0, f"C = {c:.6g}")


def test_criterion_3_sqrt_n():
    w_r, g = TWO_PI * 5.9e9, TWO_PI * 5.0
    worst = 0.0
    for N in np.logspace(0, math.log10(4.5e16), 40):
        s = vacuum_rabi_splitting(N, w_r, g)
        worst = max(worst, abs(s - 2 * g * math.sqrt(N)) / (2 * g * math.sqrt(N)))
    g_eff = enhanced_coupling(5.0, 4.5e16)
    ok = worst <= 1e-12 and abs(g_eff - 1.06e9) <= 1e6
    record(3, ok, f"max rel. error {worst:.1e}, g_eff/2pi = {g_eff / 1e9:.5f} GHz")


def test_criterion_4_geometry():
    N = spin_count_from_geometry(2.5e-3, 30e-6, 30e-6, 2e22 * 1e6)
    record(4, abs(N / 4.5e16 - 1) <= 0.02, f"N = {N:.4g}")


def test_criterion_5_round_trip(scene):
    t0 = time.perf_counter()
    spec = synthesize(scene)
    assert spec.shape == (201, 801)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        full = analyze_spectrum(spec).full
    B0 = scene.hybrid.B_FMR
    clean_ok = (abs(full.g_eff / 450e6 - 1) <= 0.005 and abs(full.gamma / 50e6 - 1) <= 0.01
                and abs(full.kappa / 3e6 - 1) <= 0.01 and abs(full.B_FMR - 0.170) <= 0.5e-3)

    def one(seed):
        s = synthesize(scene.with_noise(NoiseConfig(seed=seed, amplitude_sigma=0.05)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            f = analyze_spectrum(s).full
        return f is not None and abs(f.g_eff - 450e6) <= 20e6 and abs(f.B_FMR - B0) <= 5e-3

    hits = sum(one(seed) for seed in range(100))
    elapsed = time.perf_counter() - t0
    ok = clean_ok and hits >= 95 and elapsed < 120
    record(5, ok, f"noiseless g_eff {full.g_eff / 1e6:.4f} MHz, gamma {full.gamma / 1e6:.4f} MHz, "
                  f"kappa {full.kappa / 1e6:.4f} MHz, B_FMR {full.B_FMR * 1e3:.3f} mT; "
                  f"noisy {hits}/100 within tolerance; {elapsed:.0f} s")


def test_criterion_6_linewidth_trace(scene):
    t0 = time.perf_counter()
    tr = linewidth_trace(synthesize(scene))
    B0 = scene.hybrid.B_FMR
    far = tr.far_detuned_fwhm(B0)
    # line width in field units: the full splitting 2 g_eff mapped through g_s mu_B / h
    width_T = 2 * 450e6 / (2.17 * CODATA2018.mu_B / CODATA2018.h)
    B, w = tr.fields, tr.fwhms
    below = (B >= B0 - 3 * width_T) & (B <= B0)
    above = (B >= B0) & (B <= B0 + 3 * width_T)
    rising = bool(np.all(np.diff(w[below]) > 0)) and bool(np.all(np.diff(w[above]) < 0))
    elapsed = time.perf_counter() - t0
    ok = abs(far / 6e6 - 1) <= 0.05 and rising and elapsed < 30
    record(6, ok, f"far-detuned FWHM {far / 1e6:.3f} MHz; monotonic within +-{3 * width_T * 1e3:.0f} mT "
                  f"of B_FMR: {rising}; {elapsed:.1f} s")


def test_criterion_7_correspondence():
    w_r = TWO_PI * 5.9e9
    worst = 0.0
    for N, g in ((1e4, TWO_PI * 4.5e6), (4.5e16, TWO_PI * 5.0)):
        g_eff = g * math.sqrt(N)
        d = np.linspace(-5, 5, 101) * g_eff
        got = single_excitation_branches(N, g, w_r, d)
        R = np.hypot(d, 2 * g_eff)
        ref = np.column_stack([w_r + d / 2 - R / 2, w_r + d / 2 + R / 2])
        worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    record(7, worst <= 1e-12, f"max rel. deviation {worst:.1e}")


def test_criterion_8_saturation():
    gaps = splitting_vs_excitation(10, 1.0, 10)
    dense = [central_gap(eigvalsh(build_hamiltonian(10, E, 0.0, 0.0, 1.0).dense())) / (2 * math.sqrt(10))
             for E in range(1, 11)]
    r = np.array([x for _, x in gaps])
    ok = (abs(r[0] - 1.0) <= 1e-12 and bool(np.all(np.diff(r) < 0))
          and bool(np.allclose(r, dense, rtol=0, atol=1e-12)))
    record(8, ok, "normalized splitting " + ", ".join(f"{x:.4f}" for x in r))


def test_criterion_9_optimizer():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = {"lorentzian": 0.0, "branches": 0.0, "transmission": 0.0}
    x = np.linspace(-5, 5, 80)
    B = rng.uniform(0.0, 0.4, 60)
    lab = rng.choice([-1.0, 1.0], 60)
    for _ in range(100):
        p = np.array([rng.uniform(-1, 1), rng.uniform(0.2, 3), rng.uniform(0.1, 5), rng.uniform(-1, 1)])
        Jn = central_difference_jacobian(lambda q: lorentzian(x, *q), p, rel_step=1e-5)
        worst["lorentzian"] = max(worst["lorentzian"], rel_cols(lorentzian_jacobian(x, *p), Jn).max())
        p = np.array([rng.uniform(50, 800), rng.uniform(120, 220), rng.uniform(1.8, 2.4), rng.uniform(5, 7)])
        Jn = central_difference_jacobian(lambda q: branch_frequencies_ghz(q, B, lab), p, rel_step=1e-6)
        worst["branches"] = max(worst["branches"], rel_cols(branch_jacobian_ghz(p, B, lab), Jn).max())
        Bt, ft = rng.uniform(0.0, 0.5, 12), rng.uniform(5100.0, 6700.0, 12)
        p = np.array([rng.uniform(5.7, 6.1), rng.uniform(1, 10), rng.uniform(50, 800), rng.uniform(5, 100),
                      rng.uniform(1.9, 2.3), rng.uniform(120, 220), rng.uniform(-40, 0), rng.uniform(0.01, 1)])
        worst["transmission"] = max(worst["transmission"],
                                    rel_cols(transmission_jacobian(p, Bt, ft), transmission_jacobian_mp(p, Bt, ft)).max())
    iters, lin_err = [], 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        A, b = r.normal(size=(40, 6)), r.normal(size=40)
        p, _, diag = least_squares(lambda q: A @ q - b, np.zeros(6), jacobian_fn=lambda q: A)
        exact = np.linalg.lstsq(A, b, rcond=None)[0]
        lin_err = max(lin_err, float(np.max(np.abs(p - exact) / np.abs(exact).max())))
        iters.append(diag.iterations)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-6 and max(iters) <= 2 and lin_err <= 1e-12 and elapsed < 10
    record(9, ok, "Jacobian rel. error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                  + f"; linear solves in <= {max(iters)} iterations (rel. error {lin_err:.0e}); {elapsed:.1f} s")
