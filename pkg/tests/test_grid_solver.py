import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fpabsorb.grid_solver import (
    CFLError,
    SolverAbort,
    SolverConfig,
    ball_indicator,
    gaussian_blob,
    jacobian_bounds_check,
    jacobian_scaling,
    jump_q_eps,
    jump_weights,
    make_cutoffs,
    make_grid,
    product_data,
    random_smooth,
    run_solve,
    smoothstep,
    smoothstep_deriv,
    step_regularized,
    step_upwind,
    xi_bump,
    xi_moments,
)


class TestCutoffs:
    def test_beta_regions(self):
        c = make_cutoffs(0.1)
        e2 = 0.01
        assert c.beta(0.0) == 0.0
        assert c.beta(3 * e2) == pytest.approx(3 * e2, rel=1e-15)
        assert np.all(c.beta(np.linspace(-e2, e2, 11)) == 0)
        v = np.r_[np.linspace(-1, -2 * e2, 20), np.linspace(2 * e2, 1, 20)]
        assert np.allclose(c.beta(v), v, rtol=1e-15, atol=0)

    @settings(max_examples=200)
    @given(st.floats(0.01, 0.24), st.floats(-1, 1))
    def test_beta_between(self, eps, v):
        b = make_cutoffs(eps).beta(v)
        assert -abs(v) <= b <= abs(v)

    def test_eta_regions(self):
        c = make_cutoffs(0.1)
        assert c.eta(0.5) == 1.0
        assert np.all(c.eta(np.r_[np.linspace(0, 0.1, 5), np.linspace(0.9, 1, 5)]) == 0)
        assert np.all(c.eta(np.linspace(0.2, 0.8, 13)) == 1)
        e = c.eta(np.linspace(0, 1, 1001))
        assert e.min() >= 0 and e.max() <= 1

    def test_eta_derivative(self):
        c = make_cutoffs(0.15)
        x = np.linspace(0.01, 0.99, 97)
        h = 1e-6
        fd = (c.eta(x + h) - c.eta(x - h)) / (2 * h)
        assert np.allclose(c.eta_deriv(x), fd, atol=1e-6)

    @pytest.mark.parametrize("eps", [0.0, -0.1, 0.25, 0.3])
    def test_epsilon_range(self, eps):
        with pytest.raises(ValueError):
            make_cutoffs(eps)

    def test_smoothstep_c2(self):
        assert smoothstep(0.0) == 0 and smoothstep(1.0) == 1
        assert smoothstep_deriv(np.array([0.0, 1.0])).tolist() == [0.0, 0.0]
        h = 1e-4
        for u in (0.0, 1.0):
            second = (smoothstep(u + h) - 2 * smoothstep(u) + smoothstep(u - h)) / h**2
            assert abs(second) < 1e-2

    def test_xi_moments_exact(self):
        z = sp.symbols("z")
        bump = sp.Rational(35, 96) * (1 - z**2 / 9) ** 3
        exact = [sp.integrate(z**p * bump, (z, -3, 3)) for p in (0, 1, 2)]
        assert exact == [1, 0, 1]
        for got, want in zip(xi_moments(), (1.0, 0.0, 1.0)):
            assert abs(got - want) <= 1e-12
        assert xi_bump(3.0) == 0 and xi_bump(0.0) == pytest.approx(35 / 96)


class TestJump:
    def _field(self, fn, eps=0.2, nv=201, L=5.0):
        g = make_grid(8, nv, L)
        xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
        return g.field(fn(xx, vv)), make_cutoffs(eps), g

    def _interior(self, g, eps):
        k, _ = jump_weights(eps, g.v[1] - g.v[0])
        return slice(k.max(), g.v.size - k.max())

    def test_constant(self):
        f, c, g = self._field(lambda x, v: 3.0 + 0 * v)
        q = jump_q_eps(f, c)
        assert np.abs(q[:, self._interior(g, 0.2)]).max() < 1e-11

    def test_linear(self):
        f, c, g = self._field(lambda x, v: v + 0 * x)
        assert np.abs(jump_q_eps(f, c)[:, self._interior(g, 0.2)]).max() < 1e-11

    def test_quadratic_exact(self):
        f, c, g = self._field(lambda x, v: v**2 + 0 * x)
        q = jump_q_eps(f, c)[:, self._interior(g, 0.2)]
        assert np.allclose(q, 2.0, rtol=0, atol=1e-10)

    def test_weights(self):
        k, w = jump_weights(0.2, 0.05)
        z = k * 0.05 / 0.2
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1, abs=1e-14)
        assert (w * z).sum() == pytest.approx(0, abs=1e-14)
        assert (w * z**2).sum() == pytest.approx(1, abs=1e-14)

    def test_too_few_cells(self):
        with pytest.raises(ValueError, match="fewer than 2"):
            jump_weights(0.01, 0.1)


class TestUpwind:
    def test_zero(self):
        g = make_grid(16, 33, 4.0)
        out = step_upwind(g.zeros(), 1e-3, g)
        assert np.all(out.values == 0)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (12, 17), elements=st.floats(0, 10)))
    def test_positivity_and_max(self, vals):
        g = make_grid(12, 17, 4.0)
        vals[:, [0, -1]] = 0.0
        dt = SolverConfig(cfl_safety=1.0).dt_limit(g)
        out = step_upwind(g.field(vals), dt, g)
        assert out.values.min() >= 0
        assert out.values.max() <= vals.max() * (1 + 1e-14)

    def test_v_zero_row_is_heat_step(self):
        g = make_grid(32, 41, 4.0)
        prof = np.exp(-g.v**2)
        f = product_data(g, lambda x: 1.0 + 0 * x, lambda v: np.exp(-v**2))
        dt = 0.4 * SolverConfig().dt_limit(g)
        out = step_upwind(f, dt, g)
        j = g.v.size // 2
        dv = g.v[1] - g.v[0]
        heat = prof[j] + dt * (prof[j + 1] - 2 * prof[j] + prof[j - 1]) / dv**2
        assert np.allclose(out.values[4:-4, j], heat, rtol=1e-13)
        assert out.values[4:-4, j].max() < prof[j]

    def test_center_drift(self):
        cfg = SolverConfig(nx=256, nv=129, L=6.0, t_end=0.1)
        g = cfg.grid()
        f0 = gaussian_blob(g, (0.4, 1.0), (0.03, 0.2))
        tr = run_solve(cfg, f0, g)
        xbar = [s.x @ (s.values * s.wx[:, None]) @ s.wv / s.mass() for s in (tr.snapshots[0], tr.snapshots[-1])]
        assert xbar[1] - xbar[0] == pytest.approx(0.1, abs=2.0 / 256)


class TestRunSolve:
    def test_zero_data(self):
        tr = run_solve(SolverConfig(nx=16, nv=33, t_end=0.05))
        assert np.all(tr.mass == 0) and np.all(tr.sup == 0)

    @pytest.mark.parametrize("scheme", ["upwind", "regularized"])
    def test_bookkeeping_and_bounds(self, scheme):
        cfg = SolverConfig(scheme=scheme, epsilon=0.2, nx=64, nv=129, t_end=1.0)
        g = cfg.grid()
        tr = run_solve(cfg, random_smooth(g, 3), g)
        m0 = tr.mass[0]
        assert np.abs(tr.defect).max() <= 1e-12 * m0
        assert tr.inf.min() >= 0
        assert tr.sup.max() <= tr.sup0 * (1 + 1e-12)
        assert tr.leakage.sum() < 1e-3 * m0
        if scheme == "upwind":
            assert np.diff(tr.mass).max() <= 1e-12 * m0
            assert np.abs(tr.source).max() <= 1e-12 * m0

    def test_cfl_violation(self):
        cfg = SolverConfig(nx=32, nv=65, dt=0.1)
        with pytest.raises(CFLError):
            run_solve(cfg)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up_aborts(self):
        cfg = SolverConfig(nx=8, nv=17, t_end=0.01)
        g = cfg.grid()
        f0 = g.zeros()
        f0.values[4, 8] = np.inf
        with pytest.raises(SolverAbort) as err:
            run_solve(cfg, f0, g)
        assert err.value.diagnostics["step"] == 1

    def test_negative_data_rejected(self):
        cfg = SolverConfig(nx=8, nv=17)
        g = cfg.grid()
        f0 = g.zeros()
        f0.values[2, 3] = -1
        with pytest.raises(ValueError):
            run_solve(cfg, f0, g)

    def test_snapshot_times(self):
        cfg = SolverConfig(nx=16, nv=33, t_end=0.5, snapshot_times=(0.1, 0.25))
        tr = run_solve(cfg, gaussian_blob(cfg.grid()))
        st_ = tr.snapshot_times
        for t in (0.0, 0.1, 0.25, 0.5):
            assert np.min(np.abs(st_ - t)) <= tr.meta["dt"]

    def test_schemes_agree_under_refinement(self):
        gaps = []
        for eps, nx, nv in ((0.2, 32, 65), (0.1, 64, 129)):
            out = []
            for scheme in ("upwind", "regularized"):
                cfg = SolverConfig(scheme=scheme, epsilon=eps, nx=nx, nv=nv, L=6.0, t_end=0.5)
                g = cfg.grid()
                out.append(run_solve(cfg, gaussian_blob(g, (0.5, 0.0), (0.12, 0.6)), g).snapshots[-1].values)
            gaps.append(np.abs(out[0] - out[1]).max())
        assert gaps[1] < gaps[0]


class TestRegularizedStep:
    def test_zero(self):
        g = make_grid(32, 65, 4.0)
        out = step_regularized(g.zeros(), make_cutoffs(0.2), 1e-3, g)
        assert np.all(out.values == 0)

    def test_interior_shift_then_jump(self):
        eps = 0.1
        g = make_grid(200, 161, 4.0)
        f = gaussian_blob(g, (0.5, 1.0), (0.05, 0.3))
        dt = 1e-3
        out = step_regularized(f, make_cutoffs(eps), dt, g).values
        # cut-offs are inactive on the blob: foot x - v dt, linear interpolation
        th = g.v * dt / (g.x[1] - g.x[0])
        shifted = f.values.copy()
        shifted[1:] = np.where(th > 0, (1 - th) * f.values[1:] + th * f.values[:-1],
                               (1 + th) * f.values[1:] - th * np.r_[f.values[2:], np.zeros((1, g.v.size))])
        sf = g.field(shifted)
        sf.values[:, [0, -1]] = 0
        ref = sf.values + dt * jump_q_eps(sf, make_cutoffs(eps))
        rows = slice(60, 140)
        assert np.allclose(out[rows, 10:-10], ref[rows, 10:-10], rtol=0, atol=1e-13)


class TestJacobian:
    def test_fast_interior_path_is_one(self):
        rep = jacobian_bounds_check(make_cutoffs(0.1), 0.2, [(0.4, 0.5), (0.6, -0.8)])
        assert rep["max_deviation"] < 1e-8

    def test_frozen_characteristic(self):
        rep = jacobian_bounds_check(make_cutoffs(0.1), 1.0, [(0.05, 0.5e-2), (0.08, -0.9e-2)])
        assert rep["max_deviation"] < 1e-8

    def test_linear_scaling(self):
        rep = jacobian_scaling()
        assert rep["slope"] == pytest.approx(1.0, abs=0.25)
        c = [r["C_fit"] for r in rep["rows"]]
        assert max(c) / min(c) < 3


class TestGrid:
    def test_refined_tiles(self):
        g = make_grid(64, 129, 6.0, refine=True, x_min=2.0**-13, v_min=0.02)
        assert g.dx_cells.sum() == pytest.approx(1.0, abs=1e-14)
        assert g.dx_min < 2.0**-12
        assert np.allclose(g.v, -g.v[::-1]) and 0.0 in g.v
        assert g.dv_min < 0.03
        assert g.v[0] == -6.0

    def test_sample_zeroes_truncation_rows(self):
        g = make_grid(8, 17, 4.0)
        f = g.sample(lambda x, v: 1.0 + 0 * x)
        assert np.all(f.values[:, [0, -1]] == 0)

    def test_ball(self):
        g = make_grid(64, 129, 4.0)
        f = ball_indicator(g, (0.5, 1.0), 0.2)
        xx, vv = f.mesh()
        inside = np.hypot(xx - 0.5, vv - 1.0) <= 0.2
        assert np.all(f.values[inside] == 1) and np.all(f.values[~inside] == 0)

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            make_grid(1, 3)
