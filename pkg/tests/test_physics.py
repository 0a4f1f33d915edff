import math

import numpy as np
import pytest
from helpers import GHZ, MHZ, paper_model, rel
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from magnon_cavity_lab.constants import CODATA2018, TWO_PI, PhysicalConstants
from magnon_cavity_lab.errors import DomainError, MissingParameterError, SingularTransmissionError
from magnon_cavity_lab.physics import (HybridModel, ResonatorParams, SpinEnsembleParams, collective_coupling,
                                       cooperativity, cooperativity_from_rates, detuning, enhanced_coupling,
                                       fmr_frequency, mode_volume_from_coupling, polariton_branches,
                                       resonance_field, s21, single_spin_coupling, spin_count_from_geometry,
                                       thermal_occupancy, vacuum_field, vacuum_field_from_coupling,
                                       yig_spin_density)

# 50-digit evaluations with the CODATA 2018 values
FMR_G2_1T_HZ = 27992489872.145407
BARE_FIELD_T = 0.19425881882140752
B_FMR_T = 0.17025881882140752
DETUNING_10MT_HZ = 303718515.11277767
THERMAL_70K = 246.71446228162218
B10_5HZ_T = 3.5723867529021553e-10
VM_5HZ_M3 = 1.924735112721255e-11
GEFF_5HZ_HZ = 1060660171.7798213


def yig(g_s=2.17, B_a=0.024, gamma=0.0, **kw):
    return SpinEnsembleParams(g_s=g_s, B_a=B_a, gamma=gamma, **kw)


class TestConstants:
    def test_planck_relation_enforced(self):
        with pytest.raises(ValueError):
            PhysicalConstants(hbar=1.0, mu_B=1.0, mu_0=1.0, k_B=1.0, h=6.0)

    def test_positive(self):
        with pytest.raises(ValueError):
            PhysicalConstants(hbar=-1.0, mu_B=1.0, mu_0=1.0, k_B=1.0, h=-TWO_PI)


class TestFmrDispersion:
    def test_near_resonator_at_crossing_field(self):
        f = fmr_frequency(yig(), 0.170) / TWO_PI
        assert f == pytest.approx(5.89e9, abs=0.01e9)

    def test_zero_field(self):
        assert fmr_frequency(yig(B_a=0.0), 0.0) == 0.0

    def test_free_electron_one_tesla(self):
        assert fmr_frequency(yig(g_s=2.0, B_a=0.0), 1.0) / TWO_PI == pytest.approx(FMR_G2_1T_HZ, rel=1e-14)

    def test_negative_effective_field(self):
        with pytest.raises(DomainError):
            fmr_frequency(yig(), -0.03)

    def test_broadcasts(self):
        B = np.linspace(0, 0.5, 7)
        out = fmr_frequency(yig(), B)
        assert out.shape == (7,)
        assert np.all(np.diff(out) > 0)


class TestResonanceField:
    def test_bare_field(self):
        B = resonance_field(yig(B_a=0.0), 5.90 * GHZ)
        assert B == pytest.approx(0.194, abs=1e-3)
        assert B == pytest.approx(BARE_FIELD_T, rel=1e-14)

    def test_with_anisotropy(self):
        B = resonance_field(yig(), 5.90 * GHZ)
        assert B == pytest.approx(0.170, abs=1e-3)
        assert B == pytest.approx(B_FMR_T, rel=1e-14)

    def test_round_trip(self):
        ens = yig()
        assert resonance_field(ens, fmr_frequency(ens, 0.3)) == pytest.approx(0.3, rel=1e-15)

    def test_rejects_nonpositive_target(self):
        with pytest.raises(DomainError):
            resonance_field(yig(), 0.0)


class TestDetuning:
    def test_zero_at_crossing(self, model):
        assert detuning(model, model.B_FMR) == 0.0

    def test_ten_millitesla(self, model):
        d = detuning(model, model.B_FMR + 0.010) / TWO_PI
        assert d == pytest.approx(304e6, rel=2e-3)
        assert d == pytest.approx(DETUNING_10MT_HZ, rel=1e-9)

    def test_sign(self, model):
        assert detuning(model, model.B_FMR - 0.001) < 0 < detuning(model, model.B_FMR + 0.001)


class TestPolaritonBranches:
    def test_splitting_at_crossing(self, model):
        up, lo = polariton_branches(model, model.B_FMR)
        assert up / GHZ == pytest.approx(6.35, rel=1e-14)
        assert lo / GHZ == pytest.approx(5.45, rel=1e-14)
        assert (up - lo) / MHZ == pytest.approx(900.0, rel=1e-12)

    def test_decoupled(self):
        m = paper_model(g_eff_mhz=0.0)
        B = np.linspace(0.0, 0.4, 9)
        up, lo = polariton_branches(m, B)
        w_r = m.resonator.omega_r
        w_f = w_r + detuning(m, B)
        np.testing.assert_allclose(up, np.maximum(w_r, w_f), rtol=1e-15)
        np.testing.assert_allclose(lo, np.minimum(w_r, w_f), rtol=1e-15)

    def test_detuning_two_g(self, model):
        # Delta = 2 g: the radical gives sqrt(8) g
        B = model.B_FMR + 2 * model.g_eff / (model.ensemble.g_s * CODATA2018.mu_B / CODATA2018.hbar)
        up, lo = polariton_branches(model, B)
        assert (up - lo) == pytest.approx(2 * math.sqrt(2) * model.g_eff, rel=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=-0.15, max_value=0.15))
    def test_mirror_symmetry(self, dB):
        m = paper_model()
        w_r = m.resonator.omega_r
        up, _ = polariton_branches(m, m.B_FMR + dB)
        _, lo_m = polariton_branches(m, m.B_FMR - dB)
        d = detuning(m, m.B_FMR + dB)
        assert up - w_r - d / 2 == pytest.approx(-(lo_m - w_r + d / 2), rel=1e-9, abs=1e-3)

    def test_minimum_splitting_analytic(self, model):
        up, lo = polariton_branches(model, model.B_FMR)
        assert rel(up - lo, 2 * model.g_eff) < 1e-12

    def test_minimum_splitting_on_grid(self, model):
        B = np.arange(0.0, 0.5, 0.0025)
        up, lo = polariton_branches(model, B)
        k = int(np.argmin(up - lo))
        assert abs(B[k] - model.B_FMR) <= 0.0025
        assert np.all(up - lo >= 2 * model.g_eff * (1 - 1e-15))


class TestTransmission:
    def test_decoupled_is_lorentzian(self):
        m = paper_model(g_eff_mhz=0.0)
        r = m.resonator
        w = r.omega_r + np.linspace(-50, 50, 401) * MHZ
        p = np.abs(s21(m, 0.3, w)) ** 2
        expected = r.kappa_c ** 2 / ((w - r.omega_r) ** 2 + r.kappa ** 2)
        np.testing.assert_allclose(p, expected, rtol=1e-12)

    def test_far_detuned_peak(self, model):
        # the dispersive pull g**2/Delta must be far below kappa, hence a huge field
        v = s21(model, 1000.0, model.resonator.omega_r)
        assert v.real == pytest.approx(-model.resonator.kappa_c / model.resonator.kappa, rel=1e-3)

    def test_on_resonance_suppression(self, model):
        r = model.resonator
        ratio = abs(s21(model, model.B_FMR, r.omega_r)) / (r.kappa_c / r.kappa)
        k, g, gam = r.kappa, model.g_eff, model.ensemble.gamma
        assert ratio == pytest.approx(k / (k + 2 * g ** 2 / gam), rel=1e-12)
        assert ratio == pytest.approx(3 / 8103, rel=1e-12)

    def test_broadcast_shape(self, model):
        B = np.linspace(0, 0.3, 5)[:, None]
        w = model.resonator.omega_r + np.linspace(-1, 1, 11)[None, :] * GHZ
        assert s21(model, B, w).shape == (5, 11)

    def test_broadcast_shape_decoupled(self):
        m = paper_model(g_eff_mhz=0.0)
        B = np.linspace(0, 0.3, 5)[:, None]
        w = m.resonator.omega_r + np.linspace(-1, 1, 11)[None, :] * GHZ
        assert s21(m, B, w).shape == (5, 11)

    def test_undamped_spin_blocks_on_resonance(self):
        m = paper_model(gamma_mhz=0.0)
        w_f = m.resonator.omega_r + detuning(m, 0.25)
        assert s21(m, 0.25, w_f) == 0

    def test_singular_denominator(self):
        # kappa = 0 is rejected by validation; bypass it to reach the lossless double resonance
        res = ResonatorParams(omega_r=5.9 * GHZ, kappa_c=1.0, kappa_i=0.0)
        object.__setattr__(res, "kappa_c", 0.0)
        m = HybridModel(res, yig(gamma=0.0), g_eff=0.0, B_FMR=0.17)
        with pytest.raises(SingularTransmissionError):
            s21(m, 0.17, 5.9 * GHZ)

    @pytest.mark.parametrize("B_off", [-0.04, 0.0, 0.03])
    def test_maxima_follow_branches_when_narrow(self, B_off):
        # kappa and gamma below 1% of g_eff
        m = paper_model(g_eff_mhz=450.0, gamma_mhz=4.0, kappa_c_mhz=0.5, kappa_i_mhz=1.5)
        B = m.B_FMR + B_off
        up, lo = polariton_branches(m, B)
        tol = max(m.resonator.kappa, m.ensemble.gamma / 2)
        for target in (lo, up):
            grid = target + np.linspace(-20, 20, 4001) * MHZ
            w0 = grid[np.argmax(np.abs(s21(m, B, grid)))]
            res = minimize_scalar(lambda w: -abs(s21(m, B, w)) ** 2, bracket=(w0 - 0.05 * MHZ, w0, w0 + 0.05 * MHZ))
            assert abs(res.x - target) <= tol

    def test_pure(self, model):
        w = model.resonator.omega_r + np.linspace(-1, 1, 101) * GHZ
        a = s21(model, 0.2, w)
        b = s21(model, 0.2, w)
        assert a.tobytes() == b.tobytes()


class TestCouplingEstimators:
    def test_vacuum_field_from_mode_volume(self):
        res = ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=VM_5HZ_M3)
        assert vacuum_field(res) == pytest.approx(B10_5HZ_T, rel=1e-12)
        assert vacuum_field(res) == pytest.approx(3.6e-10, rel=0.02)

    def test_mode_volume_inversion(self):
        g = TWO_PI * 5.0
        assert vacuum_field_from_coupling(g, 2.0) == pytest.approx(B10_5HZ_T, rel=1e-12)
        assert mode_volume_from_coupling(g, 2.0, 5.9 * GHZ) == pytest.approx(VM_5HZ_M3, rel=1e-12)

    def test_quadrupled_volume_halves_field(self):
        a = vacuum_field(ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=1e-11))
        b = vacuum_field(ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=4e-11))
        assert b == pytest.approx(a / 2, rel=1e-15)

    def test_low_frequency_limit(self):
        assert vacuum_field(ResonatorParams(1e-30, 1.0, 1.0, mode_volume=1e-11)) < 1e-25

    def test_missing_mode_volume(self):
        with pytest.raises(MissingParameterError):
            vacuum_field(ResonatorParams(5.9 * GHZ, 1.0, 1.0))

    def test_single_spin_five_hertz(self):
        res = ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=VM_5HZ_M3)
        g = single_spin_coupling(res, yig(g_s=2.0))
        assert g / TWO_PI == pytest.approx(5.0, rel=1e-12)
        assert single_spin_coupling(res, yig(g_s=4.0)) == pytest.approx(2 * g, rel=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-13, 1e-9), st.floats(1e20, 1e29), st.floats(1e-6, 1.0))
    def test_collective_equals_enhanced_single(self, V_m, rho, filling):
        res = ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=V_m)
        ens = yig(g_s=2.0, rho=rho)
        N = rho * filling * V_m
        if N < 1:
            return
        g = single_spin_coupling(res, ens)
        assert rel(collective_coupling(res, ens, filling), g * math.sqrt(N)) < 1e-12

    def test_collective_needs_density(self):
        res = ResonatorParams(5.9 * GHZ, 1.0, 1.0, mode_volume=1e-11)
        with pytest.raises(MissingParameterError):
            collective_coupling(res, yig(), 0.1)

    def test_enhanced_coupling(self):
        assert enhanced_coupling(TWO_PI * 5.0, 4.5e16) / TWO_PI == pytest.approx(GEFF_5HZ_HZ, rel=1e-14)
        assert enhanced_coupling(3.0, 1.0) == 3.0
        assert enhanced_coupling(3.0, 400.0) == pytest.approx(2 * enhanced_coupling(3.0, 100.0), rel=1e-15)

    def test_spin_count(self):
        N = spin_count_from_geometry(2.5e-3, 30e-6, 30e-6, 2e28)
        assert N == pytest.approx(4.5e16, rel=1e-12)
        assert spin_count_from_geometry(1.0, 1.0, 1.0, 1.0) == 1.0
        with pytest.raises(ValueError):
            spin_count_from_geometry(0.0, 30e-6, 30e-6, 2e28)

    def test_yig_density(self):
        assert yig_spin_density(40, 1.8956e-27) / 1e6 == pytest.approx(2.11e22, rel=1e-3)
        assert yig_spin_density(1, 1.0) == 1.0
        assert yig_spin_density(40, 2.0) == pytest.approx(yig_spin_density(40, 1.0) / 2)


class TestCooperativity:
    def test_paper_rates(self):
        assert cooperativity_from_rates(450.0, 3.0, 50.0) == pytest.approx(1350.0, rel=1e-15)
        assert round(cooperativity(paper_model())) == 1350

    def test_zero_coupling(self):
        assert cooperativity_from_rates(0.0, 3.0, 50.0) == 0.0

    def test_scaling(self):
        assert cooperativity_from_rates(900.0, 12.0, 50.0) == pytest.approx(1350.0, rel=1e-15)

    def test_zero_rates_rejected(self):
        with pytest.raises(DomainError):
            cooperativity_from_rates(1.0, 0.0, 1.0)


class TestThermalOccupancy:
    def test_70_kelvin(self):
        assert thermal_occupancy(70.0, 5.9 * GHZ) == pytest.approx(THERMAL_70K, rel=1e-12)

    def test_quantum_limit(self):
        assert thermal_occupancy(0.01, 5.9 * GHZ) < 1e-12

    def test_rayleigh_jeans(self):
        w = 5.9 * GHZ
        T = 60 * CODATA2018.hbar * w / CODATA2018.k_B
        assert thermal_occupancy(T, w) == pytest.approx(60.0, rel=0.01)
