"""Langevin particles dX = V dt, dV = sqrt(2) dW with absorbing exits.

Three geometries:

``interval``   X in (0, 1), Euler-Maruyama with a fixed step.
``half_line``  X > 0, per-particle adaptive steps drawn from the exact
               Gaussian transition of the free process (needed to reach
               t ~ 10^3 with 10^6 particles).
``free``       no walls; used for moment checks.

Random numbers come from one generator per block of ``BLOCK`` consecutive
particles, seeded by SeedSequence([seed, block]).  With a fixed step the
results do not depend on how calls to ``advance_ensemble`` are chunked.  The
half-line stepper caps steps at the remaining time, so there chunking changes
the path but not its law; a fixed call pattern is still reproducible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BLOCK",
    "McConfig",
    "ParticleEnsemble",
    "SurvivalCurve",
    "make_ensemble",
    "advance_ensemble",
    "survival_curve",
    "exit_flux",
    "point_source",
    "gaussian_source",
    "transition_cov",
]

BLOCK = 1 << 16
LEFT, RIGHT = 0, 1
_GEOMETRIES = ("interval", "half_line", "free")


@dataclass
class McConfig:
    n_particles: int = 100_000
    dt: float = 1e-3
    geometry: str = "interval"
    t_end: float = 1.0
    seed: int = 0
    noise: bool = True
    # half-line only: the adaptive step never exceeds dt * 2**max_level
    max_level: int = 20

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")
        if self.geometry not in _GEOMETRIES:
            raise ValueError(f"geometry must be one of {_GEOMETRIES}")


@dataclass
class ParticleEnsemble:
    """Particle state plus exit records, indexed by particle number.

    ``exit_time`` is NaN for particles that are still alive.
    """

    xs: np.ndarray
    vs: np.ndarray
    alive: np.ndarray
    exit_time: np.ndarray
    exit_side: np.ndarray
    exit_v: np.ndarray
    time: float
    rngs: list = field(repr=False, default_factory=list)

    @property
    def n(self):
        return self.xs.size

    @property
    def n_alive(self):
        return int(self.alive.sum())

    @property
    def n_exited(self):
        return int(np.isfinite(self.exit_time).sum())

    def exit_records(self):
        """(time, side, velocity) of absorbed particles, ordered by index."""
        idx = np.flatnonzero(np.isfinite(self.exit_time))
        return self.exit_time[idx], self.exit_side[idx], self.exit_v[idx]


def _block_rngs(seed, n):
    nblocks = (n + BLOCK - 1) // BLOCK
    return [np.random.default_rng(np.random.SeedSequence([int(seed), b]))
            for b in range(nblocks)]


def make_ensemble(xs, vs, seed: int) -> ParticleEnsemble:
    xs = np.array(xs, dtype=float)
    vs = np.array(vs, dtype=float)
    if xs.shape != vs.shape or xs.ndim != 1:
        raise ValueError("xs and vs must be 1-D arrays of equal length")
    n = xs.size
    return ParticleEnsemble(
        xs=xs, vs=vs, alive=np.ones(n, dtype=bool),
        exit_time=np.full(n, np.nan), exit_side=np.full(n, -1, dtype=np.int8),
        exit_v=np.full(n, np.nan), time=0.0, rngs=_block_rngs(seed, n),
    )


def _normals(ens, idx, size=1):
    """Standard normals for the particles in ``idx`` (sorted), block by block."""
    out = np.empty((size, idx.size))
    if idx.size == 0:
        return out
    blocks = idx // BLOCK
    cuts = np.flatnonzero(np.diff(blocks)) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [idx.size]])
    for a, b in zip(starts, stops):
        out[:, a:b] = ens.rngs[blocks[a]].standard_normal((size, b - a))
    return out


def _absorb(ens, idx, t_cross, side, v):
    ens.alive[idx] = False
    ens.exit_time[idx] = t_cross
    ens.exit_side[idx] = side
    ens.exit_v[idx] = v


def _step_fixed(ens, config):
    dt = config.dt
    idx = np.flatnonzero(ens.alive)
    x0 = ens.xs[idx]
    v0 = ens.vs[idx]
    x1 = x0 + v0 * dt
    t0 = ens.time
    if config.geometry != "free":
        out_l = x1 <= 0.0
        if np.any(out_l):
            frac = x0[out_l] / (x0[out_l] - x1[out_l])
            _absorb(ens, idx[out_l], t0 + frac * dt, LEFT, v0[out_l])
        out = out_l
        if config.geometry == "interval":
            out_r = x1 >= 1.0
            if np.any(out_r):
                frac = (1.0 - x0[out_r]) / (x1[out_r] - x0[out_r])
                _absorb(ens, idx[out_r], t0 + frac * dt, RIGHT, v0[out_r])
            out = out | out_r
        keep = ~out
        idx, x1, v0 = idx[keep], x1[keep], v0[keep]
    ens.xs[idx] = x1
    if config.noise:
        v0 = v0 + math.sqrt(2.0 * dt) * _normals(ens, idx)[0]
    ens.vs[idx] = v0
    ens.time = t0 + dt


def transition_cov(delta):
    """Covariance of (X, V) increments of the free process over time delta."""
    d = np.asarray(delta, dtype=float)
    return np.array([[2.0 * d**3 / 3.0, d**2], [d**2, 2.0 * d]])


def _advance_half_line(ens, config, t_target):
    """Move every alive particle's clock to t_target with adaptive steps.

    A particle at distance x takes the largest step dt*2^j (capped by the
    remaining time) such that x > |v| D + 8 sqrt(2/3) D^{3/2}, i.e. the wall
    is more than eight positional standard deviations beyond the drift.  Far
    from the wall the crossing probability inside such a step is below
    1e-14; close to the wall the step falls back to dt and crossings are
    detected at step ends as in the interval stepper.
    """
    dt = config.dt
    clock = np.full(ens.n, ens.time)
    levels = dt * 2.0 ** np.arange(config.max_level + 1)
    c8 = 8.0 * math.sqrt(2.0 / 3.0)
    active = np.flatnonzero(ens.alive)
    while active.size:
        x = ens.xs[active]
        v = ens.vs[active]
        remaining = t_target - clock[active]
        # largest admissible level per particle
        ok = x[:, None] > np.abs(v)[:, None] * levels + c8 * levels**1.5
        j = np.maximum(ok.sum(axis=1) - 1, 0)
        # ok is monotone in the level, so the count is the first failure
        step = np.minimum(levels[j], remaining)
        z = _normals(ens, active, 2)
        x1 = x + v * step + np.sqrt(2.0 / 3.0 * step**3) * (
            0.5 * z[0] + 0.5 * math.sqrt(3.0) * z[1])
        v1 = v + np.sqrt(2.0 * step) * z[1]
        out = x1 <= 0.0
        if np.any(out):
            frac = x[out] / (x[out] - x1[out])
            _absorb(ens, active[out], clock[active[out]] + frac * step[out], LEFT, v[out])
        keep = ~out
        idx = active[keep]
        ens.xs[idx] = x1[keep]
        ens.vs[idx] = v1[keep]
        clock[idx] += step[keep]
        done = clock[idx] >= t_target - 1e-12 * max(1.0, t_target)
        active = idx[~done]
    ens.time = t_target


def advance_ensemble(ens: ParticleEnsemble, config: McConfig, steps: int) -> ParticleEnsemble:
    """Advance by ``steps`` steps of config.dt (in place; also returned)."""
    if config.geometry == "half_line":
        _advance_half_line(ens, config, ens.time + steps * config.dt)
        return ens
    for _ in range(steps):
        _step_fixed(ens, config)
    return ens


@dataclass
class SurvivalCurve:
    t: np.ndarray
    alive_frac: np.ndarray
    stderr: np.ndarray
    ensemble: ParticleEnsemble

    def rows(self):
        return list(zip(self.t.tolist(), self.alive_frac.tolist(), self.stderr.tolist()))


def survival_curve(config: McConfig, init, record_times=None) -> SurvivalCurve:
    """Alive fraction with binomial standard errors at the record times.

    ``init(rng, n)`` returns initial positions and velocities; it gets its
    own generator so the sampling does not disturb the stepping streams.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 2**31 - 1]))
    xs, vs = init(rng, config.n_particles)
    xs = np.asarray(xs, float)
    if config.geometry == "interval" and np.any((xs <= 0) | (xs >= 1)):
        raise ValueError("initial positions must lie strictly inside (0, 1)")
    if config.geometry == "half_line" and np.any(xs <= 0):
        raise ValueError("initial positions must be positive")
    ens = make_ensemble(xs, vs, config.seed)
    if record_times is None:
        record_times = np.linspace(0.0, config.t_end, 11)
    record_times = np.asarray(sorted(record_times), dtype=float)
    marks = np.rint(record_times / config.dt).astype(np.int64)
    fracs = np.empty(marks.size)
    done = 0
    for i, m in enumerate(marks):
        if m > done:
            advance_ensemble(ens, config, int(m - done))
            done = int(m)
        fracs[i] = ens.n_alive / ens.n
    se = np.sqrt(fracs * (1.0 - fracs) / ens.n)
    return SurvivalCurve(marks * config.dt, fracs, se, ens)


def exit_flux(ens: ParticleEnsemble, time_bins, v_bins):
    """Exit counts binned by time and exit velocity, one histogram per wall.

    Returns {"left": counts, "right": counts} with shape
    (len(time_bins)-1, len(v_bins)-1).
    """
    t, side, v = ens.exit_records()
    if t.size == 0:
        warnings.warn("exit_flux: no absorbed particles", RuntimeWarning, stacklevel=2)
    out = {}
    for name, code in (("left", LEFT), ("right", RIGHT)):
        sel = side == code
        out[name] = np.histogram2d(t[sel], v[sel], bins=[time_bins, v_bins])[0].astype(np.int64)
    return out


# initial samplers

def point_source(x0, v0):
    def init(_rng, n):
        return np.full(n, float(x0)), np.full(n, float(v0))
    return init


def gaussian_source(center=(0.5, 0.0), width=(0.1, 0.5), L=None):
    """Gaussian in (x, v) conditioned on 0 < x < 1 (and |v| < L if given)."""
    cx, cv = center
    sx, sv = width

    def init(rng, n):
        xs = np.empty(0)
        vs = np.empty(0)
        while xs.size < n:
            m = 2 * (n - xs.size) + 16
            x = rng.normal(cx, sx, m)
            v = rng.normal(cv, sv, m)
            ok = (x > 0) & (x < 1)
            if L is not None:
                ok &= np.abs(v) < L
            xs = np.concatenate([xs, x[ok]])
            vs = np.concatenate([vs, v[ok]])
        return xs[:n], vs[:n]

    return init
