"""Post-processing: mass and singular-amplitude series, decay and Hölder
fits, the sequence-lemma rate, tightness and scaled-derivative diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fields import PhaseField, Trajectory

__all__ = [
    "RegionSpec",
    "SeriesReport",
    "DecayFit",
    "HolderFit",
    "compute_series",
    "marginal_balance",
    "auto_window",
    "fit_exponential",
    "holder_fit",
    "decay_lemma_rate",
    "sequence_constant",
    "synthetic_sequences",
    "check_hypotheses",
    "tightness_check",
    "tightness_series",
    "scaled_derivatives",
    "derivative_scaling_check",
    "sup_by_mass",
    "amplitude_cascade",
]


# ---------------------------------------------------------------------------
# regions and series

@dataclass(frozen=True)
class RegionSpec:
    """S = {x + |v|^3 <= rho^3} united with its mirror at x = 1.

    Q is the complement of S and Q_E the complement of S shrunk to rho/2.
    """

    rho: float = 0.2

    def S(self, x, v, scale=1.0):
        r3 = (scale * self.rho) ** 3
        av3 = np.abs(v) ** 3
        return (np.abs(x) + av3 <= r3) | (np.abs(x - 1.0) + av3 <= r3)

    def Q(self, x, v):
        return ~self.S(x, v)

    def Q_E(self, x, v):
        return ~self.S(x, v, 0.5)


@dataclass
class SeriesReport:
    times: np.ndarray
    mass: np.ndarray
    zeta_s: np.ndarray
    sup_q: np.ndarray
    mass_qe: np.ndarray
    v: np.ndarray
    H: np.ndarray        # (n_times, nv) marginal int f dx
    g_left: np.ndarray   # outgoing flux density |v| f(0, v), v < 0
    g_right: np.ndarray  # outgoing flux density v f(1, v), v > 0

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in
                ("times", "mass", "zeta_s", "sup_q", "mass_qe")}


def compute_series(traj: Trajectory, region: RegionSpec = RegionSpec()) -> SeriesReport:
    """Exact discrete functionals of every snapshot.

    The wall values are those of the first and last x cells, which are the
    values the solver's flux uses.
    """
    snaps = traj.snapshots
    if not snaps:
        raise ValueError("trajectory has no snapshots")
    n = len(snaps)
    v = snaps[0].v
    xx, vv = snaps[0].mesh()
    s_mask = region.S(xx, vv)
    q_mask = ~s_mask
    qe_mask = region.Q_E(xx, vv)
    if not s_mask.any():
        raise ValueError("region S contains no grid node; refine the grid or enlarge rho")
    out = {k: np.zeros(n) for k in ("mass", "zeta_s", "sup_q", "mass_qe")}
    H = np.zeros((n, v.size))
    gl = np.zeros((n, v.size))
    gr = np.zeros((n, v.size))
    for i, s in enumerate(snaps):
        if s.values.shape != s_mask.shape:
            raise ValueError("snapshots live on different grids")
        f = s.values
        out["mass"][i] = s.mass()
        out["zeta_s"][i] = f[s_mask].max()
        out["sup_q"][i] = f[q_mask].max() if q_mask.any() else 0.0
        w = np.outer(s.wx, s.wv)
        out["mass_qe"][i] = float((f * w)[qe_mask].sum())
        H[i] = s.marginal_v()
        gl[i] = np.where(v < 0, -v * f[0], 0.0)
        gr[i] = np.where(v > 0, v * f[-1], 0.0)
    return SeriesReport(np.array([s.time for s in snaps]), out["mass"], out["zeta_s"],
                        out["sup_q"], out["mass_qe"], v, H, gl, gr)


def marginal_balance(rep: SeriesReport, wv):
    """Compare the change of int H dv with the time integral of int g dv.

    Returns (dH, flux) over consecutive snapshots; trapezoid in time.
    """
    tot_h = rep.H @ wv
    tot_g = (rep.g_left + rep.g_right) @ wv
    dH = np.diff(tot_h)
    flux = -0.5 * (tot_g[1:] + tot_g[:-1]) * np.diff(rep.times)
    return dH, flux


# ---------------------------------------------------------------------------
# exponential fits

@dataclass
class DecayFit:
    kappa: float
    window: tuple
    r_squared: float
    stderr: float
    intercept: float
    n_points: int

    def to_dict(self):
        return {"kappa": self.kappa, "window": list(self.window), "r_squared": self.r_squared,
                "stderr": self.stderr, "intercept": self.intercept, "n_points": self.n_points}


def _usable_end(y, mask):
    ok = (y > 0) & mask
    if not ok[0]:
        bad = 0
    else:
        bad = np.flatnonzero(~ok)
        bad = bad[0] if bad.size else y.size
    return bad  # exclusive end of the leading usable run


def auto_window(t, y, mask=None, tol: float = 0.05, frac: float = 0.2):
    """Longest suffix on which the local log-slope varies by less than tol.

    Local slopes are least-squares slopes over sliding windows of
    ``frac`` of the usable points.  Points after the first unusable one
    (y <= 0, or mask False, e.g. too few surviving particles) are dropped.
    Returns (t_lo, t_hi).
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    mask = np.ones(t.size, bool) if mask is None else np.asarray(mask, bool)
    end = _usable_end(y, mask)
    if end < 4:
        raise ValueError("fewer than 4 usable points for a decay fit")
    tt, ly = t[:end], np.log(y[:end])
    w = max(3, int(round(frac * end)))
    slopes = np.array([np.polyfit(tt[i:i + w], ly[i:i + w], 1)[0]
                       for i in range(end - w + 1)])
    start = slopes.size - 1
    lo = hi = slopes[-1]
    for i in range(slopes.size - 2, -1, -1):
        lo2, hi2 = min(lo, slopes[i]), max(hi, slopes[i])
        ref = abs(np.median(slopes[i:]))
        if ref == 0 or (hi2 - lo2) / ref >= tol:
            break
        lo, hi, start = lo2, hi2, i
    return float(tt[start]), float(tt[end - 1])


def fit_exponential(t, y, window=None, mask=None) -> DecayFit:
    """Least squares of log y against t on the window; kappa = -slope.

    Raises
    ------
    ValueError
        If y is not positive on the window.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if window is None:
        window = auto_window(t, y, mask)
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if mask is not None:
        sel &= np.asarray(mask, bool)
    if np.any(y[sel] <= 0):
        raise ValueError("fit_exponential needs positive values on the window")
    if sel.sum() < 3:
        raise ValueError("fewer than 3 points in the fit window")
    res = stats.linregress(t[sel], np.log(y[sel]))
    return DecayFit(-float(res.slope), (float(window[0]), float(window[1])),
                    float(res.rvalue**2), float(res.stderr), float(res.intercept),
                    int(sel.sum()))


# ---------------------------------------------------------------------------
# Hölder exponents

@dataclass
class HolderFit:
    exponent_x: float
    stderr_x: float
    ci_x: tuple
    exponent_v: float
    stderr_v: float
    ci_v: tuple
    n_x: int
    n_v: int

    @property
    def ratio(self):
        return self.exponent_v / self.exponent_x

    def to_dict(self):
        return {"exponent_x": self.exponent_x, "stderr_x": self.stderr_x, "ci_x": list(self.ci_x),
                "exponent_v": self.exponent_v, "stderr_v": self.stderr_v, "ci_v": list(self.ci_v),
                "n_x": self.n_x, "n_v": self.n_v}


def _loglog(xs, fs):
    ok = fs > 0
    xs, fs = xs[ok], fs[ok]
    if xs.size < 3:
        raise ValueError("insufficient dynamic range: fewer than 3 usable dyadic levels")
    res = stats.linregress(np.log(xs), np.log(fs))
    q = stats.t.ppf(0.975, xs.size - 2)
    slope, se = float(res.slope), float(res.stderr)
    return slope, se, (slope - q * se, slope + q * se), xs.size


def _interp_loglog(nodes, vals, at):
    ok = vals > 0
    return np.exp(np.interp(np.log(at), np.log(nodes[ok]), np.log(vals[ok])))


def holder_fit(source, t: float | None = None, wall: int = 0,
               x_range=(2.0**-12, 2.0**-4), n_v: int = 9, x_wall: float = 1e-12) -> HolderFit:
    """Power-law exponents of f near the singular point of a wall.

    exponent_x: slope of log f(x, 0) against log x at dyadic x in x_range.
    exponent_v: slope of log f(x_wall, v) against log|v| on the outgoing
    side (v < 0 at wall 0), |v| from x_range[0]^{1/3} to x_range[1]^{1/3}.

    ``source`` is a Trajectory (snapshot nearest t), a PhaseField, or a
    callable f(x, v) with x measured from the wall.  For fields x_wall is
    the first cell centre, and dyadic levels below it are discarded.
    """
    levels = 2.0 ** np.arange(round(math.log2(x_range[0])), round(math.log2(x_range[1])) + 1)
    vmag = np.geomspace(x_range[0] ** (1 / 3), x_range[1] ** (1 / 3), n_v)
    if isinstance(source, Trajectory):
        source = source.snapshot_at(0.0 if t is None else t)
    if isinstance(source, PhaseField):
        x, v, f = source.x, source.v, source.values
        if wall == 1:
            x, v, f = (1.0 - x)[::-1], -v[::-1], f[::-1, ::-1]
        if v[0] > 0 or v[-1] < 0:
            raise ValueError("velocity grid does not straddle v = 0")
        j0 = np.searchsorted(v, 0.0)
        if abs(v[j0]) < 1e-14:
            f_v0 = f[:, j0]
        else:
            w = -v[j0 - 1] / (v[j0] - v[j0 - 1])
            f_v0 = (1 - w) * f[:, j0 - 1] + w * f[:, j0]
        lv = levels[(levels >= x[0]) & (levels <= x[-1])]
        fx = _interp_loglog(x, f_v0, lv) if lv.size else np.zeros(0)
        neg = v < 0
        vm = vmag[vmag <= -v[0]]
        fv = _interp_loglog(-v[neg][::-1], f[0, neg][::-1], vm)
    else:
        fn = source
        if wall == 1:
            fn = lambda xx, vv, g=source: g(1.0 - xx, -vv)  # noqa: E731
        lv, vm = levels, vmag
        fx = np.asarray(fn(lv, np.zeros_like(lv)), float)
        fv = np.asarray(fn(np.full_like(vm, x_wall), -vm), float)
    ex, sx, cx, nx = _loglog(lv, fx)
    ev, sv, cv, nv = _loglog(vm, fv)
    return HolderFit(ex, sx, cx, ev, sv, cv, nx, nv)


# ---------------------------------------------------------------------------
# sequence lemma

def decay_lemma_rate(theta: float, beta: float, A: float, C: float, T: int) -> float:
    """mu = max(beta, theta)^{1/(2(T+1))}.

    Raises
    ------
    ValueError
        Unless 0 < theta, beta < 1, A >= C > 0 and T is a positive integer.
    """
    if not (0 < theta < 1 and 0 < beta < 1):
        raise ValueError("theta and beta must lie in (0, 1)")
    if not (C > 0 and A >= C):
        raise ValueError("need A >= C > 0")
    if int(T) != T or T < 1:
        raise ValueError("T must be a positive integer")
    return max(beta, theta) ** (1.0 / (2 * (int(T) + 1)))


def sequence_constant(z1: float, M0: float, theta, beta, A, C, T) -> float:
    """c with z_n + M_n <= c mu^n for n >= 1.

    omega_k = max(z_{2k(T+1)+1}/A, M_{2k(T+1)}) contracts by gamma, and on
    block k both z_n <= A omega_k and M_n <= omega_k, hence
    c = (A + 1) omega_0 / gamma.
    """
    gamma = max(beta, theta)
    return (A + 1.0) * max(z1 / A, M0) / gamma


def synthetic_sequences(rng, n_max=200, saturate=False, params=None):
    """One random family satisfying the three hypotheses.

    z_{n+1} = theta max(z_n, C M_{n-1}) u and M drops exactly at the
    deadlines forced by hypothesis (2), with random extra decay.  With
    ``saturate`` the random factors are 1 so every hypothesis is tight.
    Returns (params, z, M) with z[0] unused.
    """
    if params is None:
        theta = rng.uniform(0.05, 0.98)
        beta = rng.uniform(0.05, 0.98)
        C = rng.uniform(0.1, 5.0)
        A = C * rng.uniform(1.0, 10.0)
        T = int(rng.integers(1, 6))
        params = {"theta": theta, "beta": beta, "A": A, "C": C, "T": T}
    theta, beta, A, C, T = (params[k] for k in ("theta", "beta", "A", "C", "T"))
    z = np.zeros(n_max + 2)
    M = np.zeros(n_max + 2)
    M[0] = rng.uniform(0.1, 10.0)
    z[1] = M[0] * A * rng.uniform(0.1, 3.0)
    caps = []  # (deadline, cap)
    for n in range(1, n_max + 1):
        if z[n] < A * M[n - 1]:
            caps.append((n + T, beta * M[n - 1]))
        r = 1.0 if saturate else (1.0 if rng.random() < 0.7 else rng.uniform(0.5, 1.0))
        m = M[n - 1] * r
        for d, cap in caps:
            if d <= n:
                m = min(m, cap)
        caps = [(d, c) for d, c in caps if d > n]
        M[n] = m
        u = 1.0 if saturate else (1.0 if rng.random() < 0.7 else rng.uniform(0.3, 1.0))
        z[n + 1] = theta * max(z[n], C * M[n - 1]) * u
    return params, z[: n_max + 1], M[: n_max + 1]


def check_hypotheses(params, z, M, rtol=1e-12):
    """True if (z, M) satisfy monotonicity and hypotheses (1)-(3)."""
    theta, beta, A, C, T = (params[k] for k in ("theta", "beta", "A", "C", "T"))
    n_max = z.size - 1
    if np.any(np.diff(M) > rtol * M[:-1]):
        return False
    for n in range(1, n_max):
        if z[n] >= A * M[n - 1] and z[n + 1] > theta * z[n] * (1 + rtol):
            return False
        if z[n + 1] > theta * max(z[n], C * M[n - 1]) * (1 + rtol):
            return False
        if z[n] < A * M[n - 1] and n + T <= n_max and M[n + T] > beta * M[n - 1] * (1 + rtol):
            return False
    return True


# ---------------------------------------------------------------------------
# tightness

def _v_containment(field: PhaseField, delta: float):
    m = field.mass()
    if m <= 0:
        raise ValueError("tightness needs positive mass")
    H = field.marginal_v() * field.wv
    order = np.argsort(np.abs(field.v), kind="stable")
    av = np.abs(field.v[order])
    cum = np.cumsum(H[order])
    # containment at each distinct |v| level
    k = np.searchsorted(cum, (1.0 - delta) * m * (1 - 1e-14))
    k = min(k, av.size - 1)
    return float(av[k]), m


def tightness_check(source, delta: float, t: float | None = None, C: float | None = None):
    """Smallest grid |v| level B holding (1 - delta) of the mass.

    Also returns the ratio B / (1 + ln(1/(delta M)) + t); with C given the
    flag states whether B <= C (1 + ln(1/(delta M)) + t).

    Raises
    ------
    ValueError
        When B reaches the truncation L, so containment cannot be certified.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    field = source.snapshot_at(t) if isinstance(source, Trajectory) else source
    t = field.time if t is None else t
    B, m = _v_containment(field, delta)
    L = float(np.abs(field.v).max())
    if B >= L:
        raise ValueError(f"containment radius reached the truncation L = {L}")
    shape = 1.0 + math.log(1.0 / (delta * m)) + t
    ratio = B / shape
    return {"B": B, "mass": m, "shape": shape, "ratio": ratio,
            "verified": True if C is None else bool(B <= C * shape)}


def tightness_series(traj: Trajectory, delta: float, times):
    """B(t) at several times, the fitted C (largest ratio) and the slope of B in t."""
    rows = [tightness_check(traj, delta, t) for t in times]
    B = np.array([r["B"] for r in rows])
    C = max(r["ratio"] for r in rows)
    slope = float(np.polyfit(np.asarray(times, float), B, 1)[0]) if len(times) > 1 else 0.0
    return {"times": list(map(float, times)), "B": B.tolist(), "C_fit": C, "slope": slope}


# ---------------------------------------------------------------------------
# scaled derivatives near the singular set

def scaled_derivatives(x, v, fx, fv, fvv, x0: float = 0.0):
    """Maxima of d |f_x|, d^{2/3} |f_vv| and d^{1/3} |f_v| with d = |v|^3 + |x - x0|."""
    d = np.abs(v) ** 3 + np.abs(x - x0)
    return {"x": float(np.max(d * np.abs(fx))),
            "vv": float(np.max(d ** (2 / 3) * np.abs(fvv))),
            "v": float(np.max(d ** (1 / 3) * np.abs(fv)))}


def derivative_scaling_check(source, t: float | None = None, wall: int = 0,
                             x_window: float = 0.1, v_window: float = 1.0):
    """Finite-difference version of scaled_derivatives on a grid snapshot.

    Nodes within x_window of the wall and |v| <= v_window are used; the
    first and last node in each direction are skipped (one-sided stencils).
    """
    field = source.snapshot_at(0.0 if t is None else t) if isinstance(source, Trajectory) else source
    x, v, f = field.x, field.v, field.values
    if x.size < 3 or v.size < 3:
        raise ValueError("finite-difference stencil leaves the grid")
    fx = np.gradient(f, x, axis=0)
    fv = np.gradient(f, v, axis=1)
    # three-point second derivative on a non-uniform grid
    hm = np.diff(v)[:-1]
    hp = np.diff(v)[1:]
    fvv = np.zeros_like(f)
    fvv[:, 1:-1] = 2 * (hm * f[:, 2:] - (hm + hp) * f[:, 1:-1] + hp * f[:, :-2]) / (hm * hp * (hm + hp))
    x0 = 0.0 if wall == 0 else 1.0
    X, V = field.mesh()
    sel = (np.abs(X - x0) <= x_window) & (np.abs(V) <= v_window)
    sel[[0, -1], :] = False
    sel[:, [0, -1]] = False
    if not sel.any():
        return {"x": 0.0, "vv": 0.0, "v": 0.0}
    return scaled_derivatives(X[sel], V[sel], fx[sel], fv[sel], fvv[sel], x0)


# ---------------------------------------------------------------------------
# decay cascade diagnostics

def _unit_lag_pairs(times):
    """Index pairs (i, j) with times[j] - times[i] closest to 1."""
    pairs = []
    for j, tj in enumerate(times):
        i = int(np.argmin(np.abs(times - (tj - 1.0))))
        if abs(times[i] - (tj - 1.0)) < 1e-6 and i < j:
            pairs.append((i, j))
    return pairs


def sup_by_mass(rep: SeriesReport) -> float:
    """C_s = max over t of sup_Q f(t) / M_{Q_E}(t - 1) on unit-lag snapshot pairs."""
    ratios = [rep.sup_q[j] / rep.mass_qe[i] for i, j in _unit_lag_pairs(rep.times)
              if rep.mass_qe[i] > 0]
    return float(max(ratios)) if ratios else float("nan")


def amplitude_cascade(rep: SeriesReport, C_s: float):
    """Measured theta: largest zeta_s(n+1)/zeta_s(n) over unit steps with
    zeta_s(n) > C_s M(n-1).  NaN when the condition never triggers."""
    times = rep.times
    idx = {round(t, 9): i for i, t in enumerate(times)}
    worst = float("nan")
    for i, t in enumerate(times):
        prev = idx.get(round(t - 1.0, 9))
        nxt = idx.get(round(t + 1.0, 9))
        if prev is None or nxt is None or rep.zeta_s[i] <= 0:
            continue
        if rep.zeta_s[i] > C_s * rep.mass[prev]:
            r = rep.zeta_s[nxt] / rep.zeta_s[i]
            worst = r if math.isnan(worst) else max(worst, r)
    return worst
