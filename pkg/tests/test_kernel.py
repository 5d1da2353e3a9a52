import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.integrate import trapezoid

from fpabsorb.fields import PhaseField, Trajectory, dual_weights
from fpabsorb.kernel import (
    GridResolutionError,
    backward_transform,
    boundary_kernel,
    eval_g,
    fit_kernel_envelope,
    free_propagate,
    gaussian_density,
    gaussian_moments,
    layer_integral,
    limit_identity_check,
    solve_boundary_density,
)
from fpabsorb.particle_mc import transition_cov
from fpabsorb.pipelines import smooth_bump


def g_closed_form():
    x, v, nu, tau = sp.symbols("x v nu tau", real=True)
    expr = sp.sqrt(3) / (2 * sp.pi * tau**2) * sp.exp(
        -3 * (x - tau * (v + nu) / 2) ** 2 / tau**3 - (v - nu) ** 2 / (4 * tau))
    return (x, v, nu, tau), expr


class TestFundamentalSolution:
    def test_pde_symbolic(self):
        (x, v, nu, tau), g = g_closed_form()
        resid = sp.diff(g, tau) + v * sp.diff(g, x) - sp.diff(g, v, 2)
        assert sp.simplify(resid / g) == 0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-2, 2), st.floats(-3, 3), st.floats(-2, 2), st.floats(0.05, 3))
    def test_matches_gaussian_transition(self, x, v, nu, tau):
        # G is the bivariate normal with mean (tau nu, nu) and the transition covariance
        ref = gaussian_density(x, v, (tau * nu, nu), transition_cov(tau))
        assert eval_g(x, v, nu, tau) == pytest.approx(float(ref), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("nu", [-1.0, 0.0, 0.7])
    @pytest.mark.parametrize("tau", [0.05, 0.5, 2.0])
    def test_normalization(self, nu, tau):
        sx, sv = math.sqrt(2 * tau**3 / 3), math.sqrt(2 * tau)
        x = np.linspace(tau * nu - 12 * sx, tau * nu + 12 * sx, 801)
        v = np.linspace(nu - 12 * sv, nu + 12 * sv, 801)
        m = trapezoid(trapezoid(eval_g(x[:, None], v[None, :], nu, tau), v, axis=1), x)
        assert abs(m - 1) <= 1e-6

    def test_fd_residual_second_order(self):
        x, v, nu, tau = 0.1, 0.3, 0.2, 0.5
        res = []
        for k in range(4):
            h = 1e-2 / 2**k
            r = ((eval_g(x, v, nu, tau + h) - eval_g(x, v, nu, tau - h)) / (2 * h)
                 + v * (eval_g(x + h, v, nu, tau) - eval_g(x - h, v, nu, tau)) / (2 * h)
                 - (eval_g(x, v + h, nu, tau) - 2 * eval_g(x, v, nu, tau)
                    + eval_g(x, v - h, nu, tau)) / h**2)
            res.append(abs(r))
        orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        assert np.all(np.abs(orders - 2) < 0.2)

    def test_chapman_kolmogorov(self):
        nu, t1, t2 = -0.4, 0.4, 0.3
        sx, sv = math.sqrt(2 * t1**3 / 3), math.sqrt(2 * t1)
        xp = np.linspace(t1 * nu - 11 * sx, t1 * nu + 11 * sx, 601)
        wp = np.linspace(nu - 11 * sv, nu + 11 * sv, 601)
        g1 = eval_g(xp[:, None], wp[None, :], nu, t1)
        for x, v in ((0.0, 0.0), (-0.3, -0.8), (0.2, 0.5)):
            g2 = eval_g(x - xp[:, None], v, wp[None, :], t2)
            comp = trapezoid(trapezoid(g1 * g2, wp, axis=1), xp)
            assert comp == pytest.approx(eval_g(x, v, nu, t1 + t2), abs=1e-5)

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            eval_g(0.0, 0.0, 0.0, 0.0)

    def test_inner_w_integral_closed_form(self):
        # int G(x, v, w, s) dw = sqrt(3)/(2 pi s^2) sqrt(pi s) exp(-3 (x - s v)^2 / (4 s^3))
        for x, v, s in ((0.1, 0.5, 0.3), (0.02, 1.0, 0.05), (-0.2, -0.4, 1.2)):
            val, _ = integrate.quad(lambda w: eval_g(x, v, w, s), -np.inf, np.inf, epsabs=1e-14)
            ref = math.sqrt(3) / (2 * math.pi * s**2) * math.sqrt(math.pi * s) * math.exp(
                -3 * (x - s * v) ** 2 / (4 * s**3))
            assert val == pytest.approx(ref, rel=1e-9)


def _gaussian_field(mean, cov, n=161, half=(2.0, 4.0)):
    x = np.linspace(mean[0] - half[0], mean[0] + half[0], n)
    v = np.linspace(mean[1] - half[1], mean[1] + half[1], n)
    xx, vv = np.meshgrid(x, v, indexing="ij")
    return PhaseField(x, v, gaussian_density(xx, vv, mean, cov), 0.0)


class TestFreePropagation:
    def test_gaussian_moments(self):
        mean, cov = np.array([0.0, 0.4]), np.array([[0.01, 0.0], [0.0, 0.05]])
        f0 = _gaussian_field(mean, cov, n=121)
        t = 0.2
        m1, c1 = gaussian_moments(mean, cov, t)
        assert m1[1] == mean[1]
        assert c1[1, 1] - cov[1, 1] == pytest.approx(2 * t)
        assert m1[0] == pytest.approx(mean[0] + mean[1] * t)
        out = free_propagate(f0, t)
        xx, vv = out.mesh()
        ref = gaussian_density(xx, vv, m1, c1)
        assert np.abs(out.values - ref).max() <= 1e-4 * ref.max()

    def test_delta_gives_kernel(self):
        x = np.linspace(-1, 1, 41)
        v = np.linspace(-2, 2, 41)
        vals = np.zeros((41, 41))
        vals[20, 25] = 1.0
        f0 = PhaseField(x, v, vals, 0.0)
        ox, ov = np.linspace(-1, 1, 11), np.linspace(-2, 2, 11)
        out = free_propagate(f0, 0.5, ox, ov, tol=np.inf)
        w = dual_weights(x)[20] * dual_weights(v)[25]
        ref = w * eval_g(ox[:, None] - x[20], ov[None, :], v[25], 0.5)
        assert np.allclose(out.values, ref, rtol=1e-13, atol=0)

    def test_narrow_grid_rejected(self):
        f0 = _gaussian_field(np.zeros(2), np.diag([0.01, 0.05]), n=41, half=(0.3, 0.6))
        with pytest.raises(GridResolutionError):
            free_propagate(f0, 1.0)


class TestBoundaryLimit:
    def test_zero_lambda(self):
        rep = limit_identity_check(lambda w, s: np.zeros_like(np.asarray(w, float)), 1.0, 1.0,
                                   [1e-2, 1e-3])
        assert rep.rhs == 0 and np.all(rep.abs_err == 0)

    def test_bump_converges(self):
        xs = np.sort(np.r_[2.0 ** -np.arange(4, 15), 1e-4])[::-1]
        rep = limit_identity_check(smooth_bump(), 1.0, 1.0, xs, support=(0.5, 1.5))
        assert rep.abs_err[np.argmin(np.abs(rep.x - 1e-4))] <= 1e-3
        assert rep.monotone
        # linear rate in x
        slope = np.polyfit(np.log(rep.x[-5:]), np.log(rep.abs_err[-5:]), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.1)

    def test_v_must_be_positive(self):
        with pytest.raises(ValueError):
            limit_identity_check(smooth_bump(), 0.0, 1.0, [1e-3])

    def test_layer_integral_zero_x_matches_direct_quad(self):
        lam = smooth_bump()
        direct, _ = integrate.dblquad(lambda w, tau: float(lam(w, 1.0 - tau)) * eval_g(0.0, 1.0, w, tau),
                                      1e-9, 1.0, 0.5, 1.5, epsabs=1e-12)
        assert layer_integral(lam, 0.0, 1.0, 1.0, (0.5, 1.5)) == pytest.approx(direct, rel=1e-7)


class TestBoundaryDensity:
    def test_zero_source(self):
        bd = solve_boundary_density(lambda v, t: 0.0 * v * t, nt=41, nw=21)
        assert np.all(bd.values == 0)

    def test_contraction_and_residual(self):
        bd = solve_boundary_density(lambda v, t: np.exp(-((v + 1) ** 2)) * (1 + t))
        assert bd.ratios.max() < 1
        assert bd.residual <= 1e-7
        assert bd.kernel_fit["A"] > 0

    def test_window_must_be_negative(self):
        with pytest.raises(ValueError):
            solve_boundary_density(lambda v, t: v, window=(-0.5, 0.5))

    def test_kernel_sign_and_envelope(self):
        v = np.linspace(-1.4, -0.6, 9)
        assert np.all(boundary_kernel(v[:, None], v[None, :], 0.3) > 0)
        taus = np.linspace(0.01, 1.0, 100)
        fit = fit_kernel_envelope(v, v, taus)
        peaks = fit["peak"]
        assert fit["A"] > 0
        assert np.all(peaks <= fit["C"] * np.exp(-fit["A"] / taus) * (1 + 1e-12))

    def test_trace_vanishes(self):
        # phi_bar plus the layer built from lambda has zero trace on the window at x = 0
        t0 = 1.0
        phibar = lambda v, t: np.exp(-((v + 1) ** 2)) * (1 + t)  # noqa: E731
        bd = solve_boundary_density(lambda v, t: v * phibar(v, t), t0=t0)
        mu = lambda w, s: bd(-np.asarray(w), t0 - np.asarray(s))  # noqa: E731
        for v, t in ((-1.0, 0.3), (-0.8, 0.6)):
            totals = [phibar(v, t) + layer_integral(mu, x, -v, t0 - t, (0.6, 1.4))
                      for x in (1e-3, 1e-4)]
            assert abs(totals[1]) < 1e-3
            assert abs(totals[1]) < 0.2 * abs(totals[0])


class TestBackward:
    def test_involution(self):
        x = np.linspace(0.05, 0.95, 10)
        v = np.linspace(-2, 2, 9)
        rng = np.random.default_rng(0)
        snaps = [PhaseField(x, v, rng.random((10, 9)), t) for t in (0.0, 0.5, 1.0)]
        tr = Trajectory(snapshots=snaps)
        back = backward_transform(backward_transform(tr, 1.0), 1.0)
        for a, b in zip(tr.snapshots, back.snapshots):
            assert a.time == b.time and np.array_equal(a.values, b.values)

    def test_velocity_flip(self):
        x = np.array([0.5])
        v = np.array([-1.0, 0.0, 1.0])
        tr = Trajectory(snapshots=[PhaseField(x, v, np.array([[1.0, 2.0, 3.0]]), 0.25)])
        b = backward_transform(tr, 1.0).snapshots[0]
        assert b.time == 0.75
        assert b.values.tolist() == [[3.0, 2.0, 1.0]]
