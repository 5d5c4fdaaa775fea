"""Tests for the curve translation procedures.

Hand-built three-point curves give exact expected values that a
scalar re-derivation of each formula can check element by element;
the interpolation procedure is validated against a direct simulation
at the blended environment.
"""

import math

import numpy as np
import pytest

from pvdiag.arraysim import ArrayConfig, FaultClass, FaultSpec, IVCurve, array_iv_curve
from pvdiag.correction import (
    PROCEDURES,
    CorrectionFactors,
    correct_m1,
    correct_m2,
    correct_m2new,
    correct_m3,
    curve_isc,
    curve_voc,
    default_factors_shell_sp70_array,
)
from pvdiag.errors import LengthMismatch, NoVocCrossing, ZeroIrradiance
from pvdiag.pvmodule import EnvCondition


def toy_curve(g=500.0, t=300.0):
    # isc = 4.0 at v = 0; zero crossing between the last two points:
    # 10 + 3 * (20 - 10) / (3 - (-1)) = 17.5
    return IVCurve(v=np.array([0.0, 10.0, 20.0]),
                   i=np.array([4.0, 3.0, -1.0]),
                   env=EnvCondition(g=g, t=t))


def healthy_curve(env, n_points=200, blocking=True):
    cfg = ArrayConfig(blocking_diodes=blocking)
    return array_iv_curve(cfg, FaultSpec(fault_class=FaultClass.Healthy),
                          env, n_points=n_points)


class TestCurveReadouts:
    def test_isc_is_current_at_zero_volts(self):
        assert curve_isc(toy_curve()) == 4.0

    def test_voc_interpolates_the_zero_crossing(self):
        assert curve_voc(toy_curve()) == 17.5

    def test_voc_at_first_sample_when_already_nonpositive(self):
        c = IVCurve(v=np.array([0.0, 1.0]), i=np.array([-1.0, -2.0]),
                    env=EnvCondition(g=500.0, t=300.0))
        assert curve_voc(c) == 0.0

    def test_voc_raises_when_current_stays_positive(self):
        c = IVCurve(v=np.array([0.0, 1.0]), i=np.array([2.0, 1.0]),
                    env=EnvCondition(g=500.0, t=300.0))
        with pytest.raises(NoVocCrossing):
            curve_voc(c)


class TestIdentityCondition:
    """Translating a curve to its own environment must change nothing."""

    @pytest.mark.parametrize("name", sorted(PROCEDURES))
    def test_identity_is_bit_exact(self, name):
        curve = healthy_curve(EnvCondition(g=850.0, t=303.0))
        factors = default_factors_shell_sp70_array()
        out = PROCEDURES[name](curve, curve.env, factors)
        assert np.array_equal(out.v, curve.v)
        assert np.array_equal(out.i, curve.i)
        assert out.env == curve.env


class TestAdditiveProcedure:
    FACTORS = CorrectionFactors(alpha=0.1, beta=-0.2, r_s=0.5, kappa=0.01)

    def test_hand_example(self):
        # g doubles and t rises 10 K from (500, 300):
        #   i2 = i + 4 * (2 - 1) + 0.1 * 10         = i + 5
        #   v2 = v - 0.5 * 5 - 0.01 * i2 * 10 - 2   = v - 4.5 - 0.1 * i2
        out = correct_m1(toy_curve(), EnvCondition(g=1000.0, t=310.0),
                         self.FACTORS)
        np.testing.assert_allclose(out.i, [9.0, 8.0, 4.0], rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.v, [-5.4, 4.7, 15.1], rtol=0, atol=1e-12)

    def test_zero_irradiance_source_rejected(self):
        c = IVCurve(v=np.array([0.0, 1.0]), i=np.array([0.0, 0.0]),
                    env=EnvCondition(g=0.0, t=300.0))
        with pytest.raises(ZeroIrradiance):
            correct_m1(c, EnvCondition(g=1000.0, t=300.0), self.FACTORS)


class TestMultiplicativeProcedures:
    FACTORS = CorrectionFactors(alpha_rel=0.01, beta_rel=-0.005,
                                r_s=0.2, kappa=0.001, a_irr=0.06)

    def test_hand_example(self):
        # from (500, 300) to (1000, 310): dt = 10, ratio = 2, voc = 17.5
        #   i2 = i * 1.1 * 2
        #   v2 = v + 17.5 * (-0.05 + 0.06 ln 2) - 0.2 (i2 - i) - 0.001 * i2 * 10
        curve = toy_curve()
        out = correct_m2(curve, EnvCondition(g=1000.0, t=310.0), self.FACTORS)
        dv = 17.5 * (-0.05 + 0.06 * math.log(2.0))
        for k in range(3):
            i2 = curve.i[k] * 1.1 * 2.0
            v2 = curve.v[k] + dv - 0.2 * (i2 - curve.i[k]) - 0.001 * i2 * 10.0
            assert out.i[k] == pytest.approx(i2, abs=1e-12)
            assert out.v[k] == pytest.approx(v2, abs=1e-12)
        assert out.v[0] == pytest.approx(-1.1951954604120574, abs=1e-12)

    def test_revision_matches_original_when_source_is_at_25c(self):
        # the 25 degC re-reference multiplier collapses to exactly 1
        curve = toy_curve(t=298.15)
        to_env = EnvCondition(g=800.0, t=310.0)
        a = correct_m2(curve, to_env, self.FACTORS)
        b = correct_m2new(curve, to_env, self.FACTORS)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.i, b.i)

    def test_revision_shifts_voltage_only(self):
        curve = toy_curve(t=310.0)
        to_env = EnvCondition(g=800.0, t=320.0)
        a = correct_m2(curve, to_env, self.FACTORS)
        b = correct_m2new(curve, to_env, self.FACTORS)
        assert np.array_equal(a.i, b.i)
        assert not np.allclose(a.v, b.v)

    def test_zero_target_irradiance_rejected(self):
        with pytest.raises(ZeroIrradiance):
            correct_m2(toy_curve(), EnvCondition(g=0.0, t=300.0), self.FACTORS)

    def test_isc_tracks_the_irradiance_ratio(self):
        curve = healthy_curve(EnvCondition(g=800.0, t=300.0))
        out = correct_m2(curve, EnvCondition(g=1000.0, t=300.0),
                         default_factors_shell_sp70_array())
        assert curve_isc(out) == pytest.approx(curve_isc(curve) * 1.25, rel=0.02)

    def test_voc_falls_as_temperature_rises(self):
        curve = healthy_curve(EnvCondition(g=800.0, t=300.0))
        out = correct_m2(curve, EnvCondition(g=800.0, t=320.0),
                         default_factors_shell_sp70_array())
        assert curve_voc(out) < curve_voc(curve)


class TestInterpolationProcedure:
    def curves(self, n_points=200):
        c1 = healthy_curve(EnvCondition(g=800.0, t=300.0), n_points)
        c2 = healthy_curve(EnvCondition(g=1000.0, t=310.0), n_points)
        return c1, c2

    def test_endpoints_reproduce_the_inputs_bit_exactly(self):
        c1, c2 = self.curves()
        lo, env_lo = correct_m3(c1, c2, 0.0)
        hi, env_hi = correct_m3(c1, c2, 1.0)
        assert np.array_equal(lo.v, c1.v) and np.array_equal(lo.i, c1.i)
        assert np.array_equal(hi.v, c2.v) and np.array_equal(hi.i, c2.i)
        assert env_lo == c1.env and env_hi == c2.env

    def test_environment_blends_affinely(self):
        c1, c2 = self.curves(n_points=50)
        _, env = correct_m3(c1, c2, 0.25)
        assert env.g == pytest.approx(850.0, abs=1e-12)
        assert env.t == pytest.approx(302.5, abs=1e-12)

    def test_midpoint_matches_direct_simulation(self):
        # blended halfway between (800, 300) and (1000, 310) the curve
        # should agree with a fresh simulation at (900, 305); measured
        # relative RMS current error is ~0.16%, asserted under 3%
        c1, c2 = self.curves()
        mid, env = correct_m3(c1, c2, 0.5)
        assert env == EnvCondition(g=900.0, t=305.0)
        ref = healthy_curve(env)
        grid = np.linspace(0.0, min(mid.v[-1], ref.v[-1]), 200)
        err = np.interp(grid, mid.v, mid.i) - np.interp(grid, ref.v, ref.i)
        rms = math.sqrt(float(np.mean(err ** 2)))
        assert rms / curve_isc(ref) < 0.03

    def test_length_mismatch_rejected(self):
        c1, _ = self.curves(n_points=50)
        _, c2 = self.curves(n_points=60)
        with pytest.raises(LengthMismatch):
            correct_m3(c1, c2, 0.5)


class TestDefaultFactors:
    def test_datasheet_arithmetic(self):
        f = default_factors_shell_sp70_array(n_series=3, n_parallel=2)
        assert f.alpha == pytest.approx(4e-3)
        assert f.beta == pytest.approx(-0.228)
        assert f.alpha_rel == pytest.approx(2e-3 / 4.7)
        assert f.beta_rel == pytest.approx(-76e-3 / 21.4)
        assert f.r_s == pytest.approx(0.615)
        assert f.kappa == 0.0
        assert f.a_irr == pytest.approx(0.06)

    def test_procedure_registry(self):
        assert set(PROCEDURES) == {"m1", "m2", "m2new"}
