import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fpabsorb.specfun import (
    check_alpha,
    gamma_fn,
    k_plus,
    kummer_m,
    kummer_m_deriv,
    lambda_lamb,
    lambda_profile,
    tricomi_u,
)

mp.mp.dps = 50


def lamb_oracle(alpha, zeta):
    """The two-term Kummer representation summed in 200-digit arithmetic.

    For zeta < 0 the terms are of size e^{|zeta|^3} and cancel.
    """
    with mp.workdps(200):
        return _lamb(alpha, zeta)


def _lamb(alpha, zeta):
    a = mp.mpf(alpha)
    z = mp.mpf(zeta)
    t1 = mp.hyp1f1(-a, mp.mpf(2) / 3, -z**3) / (mp.gamma(mp.mpf(1) / 3 - a) * mp.gamma(mp.mpf(2) / 3))
    t2 = z * mp.hyp1f1(mp.mpf(1) / 3 - a, mp.mpf(4) / 3, -z**3) / (mp.gamma(-a) * mp.gamma(mp.mpf(4) / 3))
    return float(mp.pi / mp.sin(2 * mp.pi / 3) * (t1 + t2))


class TestGamma:
    def test_trivial_values(self):
        assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-14)
        assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_reflection_branch(self):
        x = -2 / 3 - 0.1
        assert gamma_fn(x) == pytest.approx(float(mp.gamma(mp.mpf(-2) / 3 - mp.mpf("0.1"))), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -7.0])
    def test_poles(self, x):
        with pytest.raises(ValueError, match="pole"):
            gamma_fn(x)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-20.0, 30.0).filter(lambda x: abs(x - round(x)) > 1e-3 or x > 0.5))
    def test_against_mpmath(self, x):
        assert gamma_fn(x) == pytest.approx(float(mp.gamma(x)), rel=1e-12)


class TestKummer:
    def test_trivial(self):
        assert kummer_m(-0.3, 2 / 3, 0.0) == 1.0
        for z in (-30.0, -1.0, 2.0, 50.0):
            assert kummer_m(0.0, 2 / 3, z) == 1.0

    @pytest.mark.parametrize("z", [-100.0, -40.5, -20.0, -5.0, -0.3, 0.7, 5.0, 20.0, 39.0, 41.0, 200.0])
    @pytest.mark.parametrize("a,b", [(-0.1, 2 / 3), (1 / 3 - 0.1, 4 / 3), (0.5, 1.5), (-0.75, 2 / 3)])
    def test_against_mpmath(self, a, b, z):
        ref = float(mp.hyp1f1(a, b, z))
        assert kummer_m(a, b, z) == pytest.approx(ref, rel=1e-11, abs=1e-300)

    def test_example_value(self):
        # the documented example point, high-precision series as the oracle
        assert kummer_m(-0.1, 2 / 3, -5.0) == pytest.approx(float(mp.hyp1f1(-0.1, mp.mpf(2) / 3, -5)), rel=1e-13)

    @pytest.mark.parametrize("a,b,z", [(0.3, 2 / 3, -5.0), (0.2, 4 / 3, 3.0), (1.1, 1.5, -12.0)])
    def test_integral_representation(self, a, b, z):
        # Gamma(b)/(Gamma(a)Gamma(b-a)) int_0^1 e^{zt} t^{a-1} (1-t)^{b-a-1} dt, needs b > a > 0
        val, _ = integrate.quad(lambda t: math.exp(z * t), 0.0, 1.0, weight="alg",
                                wvar=(a - 1, b - a - 1), epsabs=1e-14, epsrel=1e-13)
        ref = gamma_fn(b) / (gamma_fn(a) * gamma_fn(b - a)) * val
        assert kummer_m(a, b, z) == pytest.approx(ref, rel=1e-9)

    def test_ode_residual(self):
        alpha = 0.1
        worst = 0.0
        for z in np.linspace(-20.0, 20.0, 161):
            m = kummer_m(-alpha, 2 / 3, z)
            d1 = kummer_m_deriv(-alpha, 2 / 3, z, 1)
            d2 = kummer_m_deriv(-alpha, 2 / 3, z, 2)
            worst = max(worst, abs(z * d2 + (2 / 3 - z) * d1 + alpha * m))
        assert worst <= 1e-7

    def test_derivative_against_mpmath(self):
        for z in (-7.0, 0.5, 12.0):
            ref = float(mp.diff(lambda s: mp.hyp1f1(-0.1, mp.mpf(2) / 3, s), z))
            assert kummer_m_deriv(-0.1, 2 / 3, z) == pytest.approx(ref, rel=1e-11)

    def test_pole_in_b(self):
        with pytest.raises(ValueError):
            kummer_m(0.1, -1.0, 1.0)

    def test_overflow_reported(self):
        with pytest.raises(OverflowError):
            kummer_m(0.1, 0.5, 800.0)

    @settings(max_examples=150, deadline=None)
    @given(st.floats(-0.16, 0.5), st.sampled_from([2 / 3, 4 / 3, 5 / 3]), st.floats(-60.0, 60.0))
    def test_random_points(self, a, b, z):
        ref = float(mp.hyp1f1(a, b, z))
        assert kummer_m(a, b, z) == pytest.approx(ref, rel=1e-10, abs=1e-14)


class TestTricomi:
    def test_a_zero(self):
        assert tricomi_u(0.0, 2 / 3, 3.7) == 1.0

    @pytest.mark.parametrize("z", [0.01, 0.5, 1.9, 3.0, 10.0, 34.0, 36.0, 120.0])
    @pytest.mark.parametrize("a,b", [(-0.1, 2 / 3), (1 / 3 - 0.1, 4 / 3), (0.4, 5 / 3)])
    def test_against_mpmath(self, a, b, z):
        assert tricomi_u(a, b, z) == pytest.approx(float(mp.hyperu(a, b, z)), rel=1e-10)

    def test_connection_formula_value(self):
        # U = Gamma(1-b)/Gamma(a-b+1) M(a,b,z) + Gamma(b-1)/Gamma(a) z^{1-b} M(a-b+1,2-b,z)
        a, b, z = -0.1, 2 / 3, 3.0
        ref = (gamma_fn(1 - b) / gamma_fn(a - b + 1) * kummer_m(a, b, z)
               + gamma_fn(b - 1) / gamma_fn(a) * z ** (1 - b) * kummer_m(a - b + 1, 2 - b, z))
        assert tricomi_u(a, b, z) == pytest.approx(ref, rel=1e-12)

    def test_algebraic_growth(self):
        for z in (1e2, 1e3, 1e4):
            assert tricomi_u(-0.1, 2 / 3, z) * z ** (-0.1) == pytest.approx(1.0, abs=2.0 / z)

    def test_integer_b_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            tricomi_u(0.1, 1.0, 2.0)


class TestLambda:
    def test_value_at_zero(self):
        a = 0.1
        ref = math.pi / (math.sin(2 * math.pi / 3) * gamma_fn(1 / 3 - a) * gamma_fn(2 / 3))
        assert lambda_profile(a, 0.0) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("zeta", [-6.0, -3.0, -1.5, -0.4, 0.0, 0.8, 2.0, 5.0, 12.0])
    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.15])
    def test_against_high_precision(self, alpha, zeta):
        assert lambda_profile(alpha, zeta) == pytest.approx(lamb_oracle(alpha, zeta), rel=1e-10)

    def test_u_route_matches_kummer_pair(self):
        # U assembled from two M evaluations and substituted for Lambda
        for zeta in np.linspace(-1.8, 1.8, 19):
            u = tricomi_u(-0.1, 2 / 3, -zeta**3) if zeta != 0 else tricomi_u(-0.1, 2 / 3, 0.0)
            assert u == pytest.approx(lambda_lamb(0.1, zeta), rel=1e-10)

    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.15])
    def test_positive(self, alpha):
        assert np.all(lambda_profile(alpha, np.linspace(-50.0, 50.0, 2001)) > 0)

    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.15])
    def test_asymptotes(self, alpha):
        z = 50.0
        assert lambda_profile(alpha, -z) / z ** (3 * alpha) == pytest.approx(1.0, abs=0.02)
        assert lambda_profile(alpha, z) / (k_plus(alpha) * z ** (3 * alpha)) == pytest.approx(1.0, abs=0.02)

    def test_ode_residual_second_order(self):
        alpha = 0.1
        zs = np.linspace(-10.0, 10.0, 101)
        res = []
        for h in (2.0**-8, 2.0**-9, 2.0**-10, 2.0**-11):
            lp, l0, lm = (lambda_profile(alpha, zs + d) for d in (h, 0.0, -h))
            r = (lp - 2 * l0 + lm) / h**2 + 3 * zs**2 * (lp - lm) / (2 * h) - 9 * alpha * zs * l0
            res.append(np.abs(r).max())
        orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        assert np.all(np.abs(orders - 2) < 0.1)
        assert res[-1] <= 1e-6

    def test_alpha_range(self):
        for bad in (0.0, 1 / 6, 0.2, -0.1):
            with pytest.raises(ValueError):
                lambda_profile(bad, 1.0)
        assert check_alpha(0.1) == 0.1


class TestKPlus:
    def test_limits(self):
        assert k_plus(1e-12) == pytest.approx(1.0, abs=1e-10)
        assert k_plus(1 / 6 - 1e-12) == pytest.approx(0.0, abs=1e-10)
        assert k_plus(0.1) == pytest.approx(2 * math.cos(13 * math.pi / 30), rel=1e-15)

    def test_positive_on_range(self):
        assert all(k_plus(a) > 0 for a in np.linspace(1e-6, 1 / 6 - 1e-6, 50))
