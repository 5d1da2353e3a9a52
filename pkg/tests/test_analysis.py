import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpabsorb.analysis import (
    RegionSpec,
    SeriesReport,
    amplitude_cascade,
    auto_window,
    check_hypotheses,
    compute_series,
    decay_lemma_rate,
    fit_exponential,
    holder_fit,
    scaled_derivatives,
    sequence_constant,
    sup_by_mass,
    synthetic_sequences,
    tightness_check,
    tightness_series,
)
from fpabsorb.fields import PhaseField, Trajectory
from fpabsorb.grid_solver import SolverConfig, gaussian_blob, make_grid, run_solve


class TestExponentialFit:
    def test_exact(self):
        t = np.linspace(0, 5, 51)
        fit = fit_exponential(t, 3.0 * np.exp(-1.7 * t), window=(1.0, 5.0))
        assert fit.kappa == pytest.approx(1.7, rel=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), rel=1e-12)
        assert fit.r_squared == pytest.approx(1.0) and fit.n_points == 41

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.2, 5.0), st.integers(0, 2**31))
    def test_noisy_within_stderr(self, kappa, seed):
        rng = np.random.default_rng(seed)
        t = np.linspace(0, 4, 81)
        y = np.exp(-kappa * t + 0.01 * rng.standard_normal(t.size))
        fit = fit_exponential(t, y, window=(0, 4))
        assert abs(fit.kappa - kappa) <= 6 * fit.stderr + 1e-12

    def test_auto_window_skips_transient(self):
        t = np.linspace(0, 10, 201)
        y = np.exp(-t) * (1 + 5 * np.exp(-4 * t))
        lo, hi = auto_window(t, y)
        assert hi == 10.0
        # local slopes average over 2 time units, so the cut sits near 0.85
        assert lo >= 0.5
        assert fit_exponential(t, y).kappa == pytest.approx(1.0, rel=5e-3)
        assert fit_exponential(t, y, window=(0, 10)).kappa > 1.01

    def test_mask_truncates(self):
        t = np.linspace(0, 10, 101)
        y = np.exp(-0.5 * t)
        mask = t <= 6.0
        lo, hi = auto_window(t, y, mask)
        assert hi == pytest.approx(6.0)

    def test_errors(self):
        t = np.linspace(0, 1, 10)
        with pytest.raises(ValueError):
            fit_exponential(t, np.r_[np.ones(5), -np.ones(5)], window=(0, 1))
        with pytest.raises(ValueError):
            auto_window(t, np.r_[1.0, 0.5, 0.0, np.ones(7)])


class TestHolder:
    @pytest.mark.parametrize("a", [0.05, 0.1, 0.3])
    def test_closed_form(self, a):
        fit = holder_fit(lambda x, v: (x + np.abs(v) ** 3) ** a)
        assert fit.exponent_x == pytest.approx(a, abs=1e-12)
        assert fit.exponent_v == pytest.approx(3 * a, abs=1e-6)
        assert fit.ratio == pytest.approx(3.0, abs=1e-4)
        assert fit.ci_x[0] <= fit.exponent_x <= fit.ci_x[1]

    def test_on_grid_field(self):
        g = make_grid(256, 257, 4.0, refine=True, x_min=2.0**-14, v_min=0.01)
        f = g.sample(lambda x, v: (x + np.abs(v) ** 3) ** 0.2)
        fit = holder_fit(f)
        assert fit.exponent_x == pytest.approx(0.2, abs=0.02)
        assert fit.exponent_v == pytest.approx(0.6, abs=0.05)

    def test_wall_one_mirror(self):
        fn = lambda x, v: ((1 - x) + np.abs(v) ** 3) ** 0.2  # noqa: E731
        fit = holder_fit(fn, wall=1)
        assert fit.exponent_x == pytest.approx(0.2, abs=1e-9)

    def test_dynamic_range(self):
        with pytest.raises(ValueError, match="dynamic range"):
            holder_fit(lambda x, v: 0 * x)


class TestSequenceLemma:
    def test_rate(self):
        assert decay_lemma_rate(0.5, 0.25, 2.0, 1.0, 3) == pytest.approx(0.5 ** (1 / 8))

    @pytest.mark.parametrize("args", [(1.0, 0.5, 2, 1, 1), (0.5, 0.0, 2, 1, 1),
                                      (0.5, 0.5, 1, 2, 1), (0.5, 0.5, 2, 1, 0), (0.5, 0.5, 2, 1, 1.5)])
    def test_rate_errors(self, args):
        with pytest.raises(ValueError):
            decay_lemma_rate(*args)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.booleans())
    def test_families_satisfy_lemma(self, seed, saturate):
        rng = np.random.default_rng(seed)
        p, z, M = synthetic_sequences(rng, n_max=120, saturate=saturate)
        assert check_hypotheses(p, z, M)
        mu = decay_lemma_rate(**p)
        c = sequence_constant(z[1], M[0], **p)
        n = np.arange(1, z.size)
        assert np.all(z[1:] + M[1:] <= c * mu**n * (1 + 1e-12))

    def test_violation_detected(self):
        rng = np.random.default_rng(1)
        p, z, M = synthetic_sequences(rng, n_max=50)
        M = M.copy()
        M[10] = 2 * M[9]
        assert not check_hypotheses(p, z, M)
        p2, z2, M2 = synthetic_sequences(np.random.default_rng(2), n_max=50)
        z2 = z2.copy()
        z2[5] = 10 * z2[4] + 10 * p2["C"] * M2[3]
        assert not check_hypotheses(p2, z2, M2)


class TestTightness:
    def _field(self, sigma=0.5, L=6.0, t=0.0):
        x = np.linspace(0.0025, 0.9975, 200)
        v = np.linspace(-L, L, 2401)
        vals = np.ones((200, 1)) * np.exp(-0.5 * (v / sigma) ** 2)[None, :]
        return PhaseField(x, v, vals, t)

    def test_gaussian_quantile(self):
        f = self._field()
        rep = tightness_check(f, 0.05)
        assert rep["B"] == pytest.approx(1.959964 * 0.5, abs=0.01)
        shape = 1 + math.log(1 / (0.05 * rep["mass"]))
        assert rep["ratio"] == pytest.approx(rep["B"] / shape)
        assert tightness_check(f, 0.05, C=10.0)["verified"]
        assert not tightness_check(f, 0.05, C=0.01)["verified"]

    def test_truncation_reached(self):
        with pytest.raises(ValueError, match="truncation"):
            tightness_check(self._field(sigma=50.0, L=2.0), 1e-6)

    def test_delta_range(self):
        with pytest.raises(ValueError):
            tightness_check(self._field(), 1.5)

    def test_series_on_solver_output(self):
        cfg = SolverConfig(nx=32, nv=129, L=8.0, t_end=1.0, snapshot_times=(0.5,))
        tr = run_solve(cfg, gaussian_blob(cfg.grid(), (0.5, 0.0), (0.1, 0.3)))
        rep = tightness_series(tr, 0.05, [0.0, 0.5, 1.0])
        assert rep["B"][0] < rep["B"][-1] < 8.0
        assert rep["C_fit"] > 0


def test_scaled_derivatives():
    out = scaled_derivatives(np.array([0.5]), np.array([1.0]), np.array([2.0]),
                             np.array([-3.0]), np.array([4.0]))
    d = 1.5
    assert out == pytest.approx({"x": 2 * d, "vv": 4 * d ** (2 / 3), "v": 3 * d ** (1 / 3)})


class TestSeries:
    def test_compute_series(self):
        cfg = SolverConfig(nx=64, nv=65, L=4.0, t_end=0.5, snapshot_times=(0.25,))
        tr = run_solve(cfg, gaussian_blob(cfg.grid(), (0.3, 0.5), (0.1, 0.5)))
        rep = compute_series(tr, RegionSpec(0.3))
        assert np.allclose(rep.mass, [s.mass() for s in tr.snapshots], rtol=1e-14)
        assert np.all(rep.zeta_s <= [s.values.max() for s in tr.snapshots])
        assert np.all(rep.mass_qe <= rep.mass * (1 + 1e-14))
        assert np.all(rep.g_left >= 0) and np.all(rep.g_right >= 0)

    def test_no_node_in_region(self):
        x = np.array([0.5])
        v = np.array([-2.0, 2.0])
        tr = Trajectory(snapshots=[PhaseField(x, v, np.ones((1, 2)), 0.0)])
        with pytest.raises(ValueError, match="region S"):
            compute_series(tr)

    def test_cascade_diagnostics(self):
        times = np.arange(5.0)
        rep = SeriesReport(times, mass=np.array([1.0, 0.5, 0.25, 0.125, 0.0625]),
                           zeta_s=np.array([4.0, 2.0, 1.0, 0.4, 0.1]),
                           sup_q=np.array([1.0, 0.6, 0.3, 0.1, 0.05]),
                           mass_qe=np.array([1.0, 0.5, 0.2, 0.1, 0.05]),
                           v=np.zeros(1), H=np.zeros((5, 1)), g_left=np.zeros((5, 1)),
                           g_right=np.zeros((5, 1)))
        assert sup_by_mass(rep) == pytest.approx(max(0.6 / 1.0, 0.3 / 0.5, 0.1 / 0.2, 0.05 / 0.1))
        # zeta_s(n) > C_s M(n-1) for n = 1, 2, 3 with C_s = 1
        assert amplitude_cascade(rep, 1.0) == pytest.approx(max(1.0 / 2.0, 0.4 / 1.0, 0.1 / 0.4))
        assert math.isnan(amplitude_cascade(rep, 100.0))
