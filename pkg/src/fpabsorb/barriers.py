"""Comparison functions: steady solutions, the self-similar super-solution
Z0 and f-hat, the escape sub-solution and barriers at |v| -> infinity.

Self-similar variables (time-dependent problem, wall x = 0):

    y = x / t^{3/2},   xi = v / t^{1/2},   zeta = xi / (9 y)^{1/3}.

A function f(x, v, t) = Z(y, xi) satisfies

    f_t + v f_x - f_vv = -(1/t) L[Z],
    L[Z] = Z_xixi + (1/2) xi Z_xi + ((3/2) y - xi) Z_y,

so Z is a super-solution when L[Z] <= 0.

For G = y^p psi(zeta) one finds

    L[G] = 9^{-2/3} y^{p-2/3} (psi'' + 3 zeta^2 psi' - 9 p zeta psi) + (3/2) p G.

F0 = y^alpha Lambda(zeta) has L[F0] = (3/2) alpha F0 > 0.  The correction
R0 = y^{2/3+alpha} psi(zeta) with

    psi'' + 3 zeta^2 psi' - 9 (2/3 + alpha) zeta psi = -9 gamma Lambda        (*)

gives

    L[F0 + R0] = y^alpha Lambda ((3/2) alpha - 9^{1/3} gamma)
                 + (1 + (3/2) alpha) R0,

which is negative wherever |R0| is a small fraction of F0.  In terms of
z = -zeta^3 and phi(z) = psi(zeta), (*) is the inhomogeneous Kummer equation
z phi'' + (2/3 - z) phi' + (2/3 + alpha) phi = -gamma z^{-1/3} Lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .specfun import (check_alpha, gamma_fn, k_plus, kummer_m, lambda_profile,
                      tricomi_u)

__all__ = [
    "SelfSimilarProfile",
    "SuperSolutionZ0",
    "EscapeSubSolution",
    "Barrier",
    "steady_regular_f0",
    "steady_singular",
    "wronskian_mu",
    "fd_operator",
    "build_z0",
    "fhat_eval",
    "fhat_two_wall",
    "compare_super",
    "escape_check",
    "make_escape",
    "infinity_barrier",
]

_TABLE_HALF = 8.0
_TABLE_STEP = 0.01


@dataclass(frozen=True)
class SelfSimilarProfile:
    """The profile Lambda for a fixed alpha, with a cubic-spline table.

    On [-8, 8] values come from the table (relative error ~1e-10); outside
    they are evaluated directly, where the asymptotic expansions are fast.
    """

    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)

    @property
    def k_plus(self):
        return k_plus(self.alpha)

    def exact(self, zeta):
        return lambda_profile(self.alpha, zeta)

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        spl = _lambda_table(self.alpha)
        inside = np.abs(zeta) <= _TABLE_HALF
        out = np.empty_like(zeta)
        out[inside] = spl(zeta[inside])
        if np.any(~inside):
            out[~inside] = lambda_profile(self.alpha, zeta[~inside])
        return out if out.ndim else float(out)


@lru_cache(maxsize=16)
def _lambda_table(alpha):
    z = np.arange(-_TABLE_HALF, _TABLE_HALF + 0.5 * _TABLE_STEP, _TABLE_STEP)
    return CubicSpline(z, lambda_profile(alpha, z))


def _zeta(x, v):
    return v / np.cbrt(9.0 * x)


# ---------------------------------------------------------------------------
# steady solutions

def steady_regular_f0(profile: SelfSimilarProfile, x, v):
    """F0(x, v) = x^alpha Lambda(v / (9x)^{1/3}), a positive steady solution."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("steady_regular_f0 needs x > 0")
    return x**profile.alpha * profile(_zeta(x, np.asarray(v, dtype=float)))


def steady_singular(alpha_neg: float, k: int, x, v):
    """Steady solution blowing up at the singular point of wall k.

    Wall 0: x^alpha M(-alpha, 2/3, -v^3/(9x)); wall 1 by (x, v) -> (1-x, -v).
    Values beyond double range come back as inf.
    """
    if not -0.5 < alpha_neg < 0:
        raise ValueError("steady_singular needs a small negative alpha")
    if k not in (0, 1):
        raise ValueError("wall index must be 0 or 1")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if k == 1:
        x, v = 1.0 - x, -v
    if np.any(x <= 0):
        raise ValueError("steady_singular is undefined on the wall")
    z = -(v**3) / (9.0 * x)
    m = np.vectorize(lambda zz: _kummer_or_inf(-alpha_neg, 2.0 / 3.0, zz), otypes=[float])(z)
    return x**alpha_neg * m


def _kummer_or_inf(a, b, z):
    # deep in the incoming corner M exceeds double range; as a bound that is +inf
    try:
        return kummer_m(a, b, z)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# Z0

def wronskian_mu(a: float, b: float, z: float) -> float:
    """W{M, U}(z) = M U' - M' U = -Gamma(b) |z|^{-b} e^z / Gamma(a)."""
    return -gamma_fn(b) * abs(z) ** (-b) * math.exp(z) / gamma_fn(a)


@dataclass
class SuperSolutionZ0:
    profile: SelfSimilarProfile
    gamma: float
    psi_spline: CubicSpline = field(repr=False)
    zeta_lo: float
    zeta_hi: float
    tails: tuple = field(repr=False)
    r_max: float = float("nan")
    K: float = float("nan")
    margin: float = float("nan")
    domination: float = float("nan")
    worst: tuple = ()
    history: list = field(default_factory=list)

    @property
    def alpha(self):
        return self.profile.alpha

    @property
    def p(self):
        return 2.0 / 3.0 + self.profile.alpha

    def psi(self, zeta, nu: int = 0):
        """psi and its derivatives; power-law tails beyond the table."""
        zeta = np.asarray(zeta, dtype=float)
        out = np.empty_like(zeta)
        mid = (zeta >= self.zeta_lo) & (zeta <= self.zeta_hi)
        out[mid] = self.psi_spline(zeta[mid], nu)
        m = 3.0 * self.p
        for sel, (A, B) in ((zeta < self.zeta_lo, self.tails[0]),
                            (zeta > self.zeta_hi, self.tails[1])):
            if np.any(sel):
                s = np.abs(zeta[sel])
                sign = np.sign(zeta[sel]) ** nu
                out[sel] = sign * (A * _pow_deriv(s, m, nu) + B * _pow_deriv(s, m - 3.0, nu))
        return out if out.ndim else float(out)

    def phi(self, z):
        """phi(z) = psi(-z^{1/3})."""
        return self.psi(-np.cbrt(np.asarray(z, dtype=float)))

    def f0(self, y, xi):
        y = np.asarray(y, dtype=float)
        return y**self.alpha * self.profile(_zeta(y, np.asarray(xi, dtype=float)))

    def r0(self, y, xi):
        y = np.asarray(y, dtype=float)
        return y**self.p * self.psi(_zeta(y, np.asarray(xi, dtype=float)))

    def __call__(self, y, xi):
        return self.f0(y, xi) + self.r0(y, xi)

    def in_region(self, y, xi, r=None):
        r = self.r_max if r is None else r
        return (np.abs(xi) ** 3 + np.abs(y) <= r**3) & (np.asarray(y) > 0)

    def operator(self, y, xi, rel_step=1e-3):
        """L[Z0] = (3/2) alpha F0 + L[R0], with L[R0] by centred differences.

        F0 enters through its exact identity: differencing it directly would
        amplify table errors in Lambda'' by (9y)^{-2/3} near y = 0.
        """
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return 1.5 * self.alpha * self.f0(y, xi) + fd_operator(self.r0, y, xi, rel_step)

    def operator_closed(self, y, xi):
        """L[Z0] from the reduction above (exact when psi solves (*))."""
        a = self.alpha
        f0 = self.f0(y, xi)
        return f0 * (1.5 * a - 9.0 ** (1.0 / 3.0) * self.gamma) + (1 + 1.5 * a) * self.r0(y, xi)

    def ode_residual(self, zeta):
        """Residual of (*) using the spline derivatives."""
        zeta = np.asarray(zeta, dtype=float)
        return (self.psi(zeta, 2) + 3 * zeta**2 * self.psi(zeta, 1)
                - 9 * self.p * zeta * self.psi(zeta)
                + 9 * self.gamma * self.profile(zeta))

    def report(self):
        return {
            "alpha": self.alpha, "gamma": self.gamma, "r_max": self.r_max,
            "K": self.K, "margin": self.margin, "domination": self.domination,
            "worst_sample": list(self.worst), "history": self.history,
        }


def fd_operator(fn, y, xi, rel_step=1e-3):
    """Z_xixi + (1/2) xi Z_xi + ((3/2) y - xi) Z_y by centred differences."""
    hy = rel_step * y
    hx = rel_step * np.cbrt(9.0 * y)
    z00 = fn(y, xi)
    zp, zm = fn(y, xi + hx), fn(y, xi - hx)
    zy = (fn(y + hy, xi) - fn(y - hy, xi)) / (2 * hy)
    return (zp - 2 * z00 + zm) / hx**2 + 0.5 * xi * (zp - zm) / (2 * hx) + (1.5 * y - xi) * zy


def _pow_deriv(s, m, nu):
    c = 1.0
    for j in range(nu):
        c *= m - j
    return c * s ** (m - nu)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _panel_integrals(fn, edges):
    """Integral of fn over each panel by 12-point Gauss-Legendre."""
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    vals = fn(nodes).reshape(mid.size, _GL_X.size)
    return half * (vals @ _GL_W)


def _vec(f):
    return np.vectorize(f, otypes=[float])


@lru_cache(maxsize=8)
def _psi_table(alpha, gamma, s_neg=8.0, s_pos=12.0, h=0.05):
    """psi on [-s_neg, s_pos] as a cubic spline plus C^1 power tails.

    zeta <= 0: variation of constants in z = |zeta|^3 with the Kummer pair
    M(a, 2/3, z), U(a, 2/3, z), a = -(2/3 + alpha).  After the substitution
    eta = s^3 both quadratures have smooth integrands:

        I1(s) = c 3 int_s^inf  Q(sig^3) U(a, b, sig^3) e^{-sig^3} dsig
        I2(s) = c 3 int_0^s    Q(sig^3) M(a, b, sig^3) e^{-sig^3} dsig
        c = -gamma Gamma(a) / Gamma(b),  Q(eta) = U(-alpha, 2/3, eta)

    and phi = -M I1 - U I2.  The growing homogeneous mode e^{|zeta|^3} is
    absent by construction.

    zeta >= 0: (*) is integrated forward from zeta = 0 with psi(0) = -I1(0),
    psi'(0) = 0.  Forward is the stable direction here because the second
    homogeneous mode decays like e^{-zeta^3}.
    """
    a, b = -(2.0 / 3.0 + alpha), 2.0 / 3.0
    c = -gamma * gamma_fn(a) / gamma_fn(b)
    top = s_neg + 1.0  # e^{-(s+1)^3 + s^3} is below 1e-80 for s >= 8
    edges = np.arange(0.0, top + 0.5 * h, h)
    qfun = _vec(lambda s: tricomi_u(-alpha, b, s**3))
    ufun = _vec(lambda s: tricomi_u(a, b, s**3))
    mfun = _vec(lambda s: kummer_m(a, b, s**3))
    p1 = _panel_integrals(lambda s: qfun(s) * ufun(s) * np.exp(-(s**3)), edges)
    keep = edges <= s_neg + 1e-12
    p2 = _panel_integrals(lambda s: qfun(s) * mfun(s) * np.exp(-(s**3)), edges[keep])
    i1 = 3 * c * np.concatenate([np.cumsum(p1[::-1])[::-1], [0.0]])
    i2 = 3 * c * np.concatenate([[0.0], np.cumsum(p2)])
    s_nodes = edges[keep]
    z = s_nodes**3
    mz = np.array([kummer_m(a, b, zz) for zz in z])
    uz = np.array([tricomi_u(a, b, zz) if zz > 0 else gamma_fn(1 - b) / gamma_fn(a - b + 1)
                   for zz in z])
    psi_neg = -mz * i1[keep] - uz * i2

    p = 2.0 / 3.0 + alpha
    prof = SelfSimilarProfile(alpha)

    def rhs(zeta, y):
        return [y[1], -3 * zeta**2 * y[1] + 9 * p * zeta * y[0] - 9 * gamma * prof(zeta)]

    pos = np.arange(0.0, s_pos + 0.5 * h, h)
    sol = integrate.solve_ivp(rhs, (0.0, s_pos), [psi_neg[0], 0.0], t_eval=pos,
                              method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"psi integration failed: {sol.message}")
    zeta = np.concatenate([-s_nodes[::-1], pos[1:]])
    vals = np.concatenate([psi_neg[::-1], sol.y[0, 1:]])
    dpos = sol.y[1, -1]
    spl = CubicSpline(zeta, vals)
    m = 3.0 * p
    tails = []
    for edge, val, slope in ((-s_neg, vals[0], None), (s_pos, vals[-1], dpos)):
        s = abs(edge)
        d = float(spl(edge, 1)) * (-1 if edge < 0 else 1) if slope is None else slope
        # A s^m + B s^{m-3} matches value and slope in s = |zeta|
        mat = np.array([[s**m, s ** (m - 3)], [m * s ** (m - 1), (m - 3) * s ** (m - 4)]])
        tails.append(tuple(np.linalg.solve(mat, [val, d])))
    return spl, -s_neg, s_pos, tuple(tails)


def _region_samples(r, n=64, y_floor=1e-6):
    """Sample grid of {|xi|^3 + y <= r^3}: geometric in y, uniform in xi."""
    cy = np.geomspace(y_floor, 1.0, n)
    cx = np.linspace(-1.0, 1.0, n)
    Y, X = np.meshgrid(cy, cx, indexing="ij")
    keep = np.abs(X) ** 3 + Y <= 1.0
    return r**3 * Y[keep], r * X[keep]


def _boundary_samples(r, n=257):
    th = np.linspace(-1.0, 1.0, n)
    xi = r * th
    y = r**3 * (1.0 - np.abs(th) ** 3)
    ok = y > 0
    # include points just above the wall at the corners
    return np.concatenate([y[ok], [r**3 * 1e-9] * 2]), np.concatenate([xi[ok], [-r, r]])


def build_z0(profile: SelfSimilarProfile, gamma: float | None = None,
             r_start: float = 2.0, n_samples: int = 64, domination_max: float = 0.2,
             r_min: float = 2.0**-8) -> SuperSolutionZ0:
    """Assemble Z0 = F0 + R0 and find the validity radius.

    r_max is the largest dyadic radius at which |R0| <= 0.2 F0 and
    L[Z0] <= 0 hold on a 64 x 64 sample grid of the region.  K is the
    smallest power of two with K Z0 >= 1 on the region boundary.

    Raises
    ------
    ValueError
        If gamma <= (3/2) alpha, or no dyadic radius down to r_min passes.
    """
    alpha = profile.alpha
    gamma = 3.0 * alpha if gamma is None else float(gamma)
    if gamma <= 1.5 * alpha:
        raise ValueError("gamma must exceed (3/2) alpha")
    spl, lo, hi, tails = _psi_table(alpha, gamma)
    z0 = SuperSolutionZ0(profile, gamma, spl, lo, hi, tails)
    r = r_start
    while r >= r_min:
        y, xi = _region_samples(r, n_samples)
        f0 = z0.f0(y, xi)
        dom = np.abs(z0.r0(y, xi)) / f0
        op = z0.operator(y, xi) / f0
        worst = int(np.argmax(op))
        z0.history.append({"r": r, "domination": float(dom.max()),
                           "margin": float(op.max())})
        if dom.max() <= domination_max and op.max() <= 0:
            z0.r_max = r
            z0.domination = float(dom.max())
            z0.margin = float(op.max())
            z0.worst = (float(y[worst]), float(xi[worst]), float(op[worst]))
            by, bxi = _boundary_samples(r)
            zmin = float(z0(by, bxi).min())
            if zmin <= 0:
                raise ValueError("Z0 is not positive on the region boundary")
            z0.K = float(2.0 ** max(1, math.ceil(math.log2(1.0 / zmin))))
            return z0
        r /= 2.0
    raise ValueError(f"no validity radius >= {r_min} found; history: {z0.history}")


def fhat_eval(z0: SuperSolutionZ0, K: float, x, v, t, return_flags: bool = False):
    """min(K Z0(x/t^{3/2}, v/t^{1/2}), 1), set to 1 outside the validated region.

    With return_flags the boolean array of out-of-region points is returned
    as well.
    """
    if np.any(np.asarray(t) <= 0):
        raise ValueError("fhat_eval needs t > 0")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = x / np.power(t, 1.5)
    xi = v / np.sqrt(t)
    inside = z0.in_region(y, xi)
    out = np.ones(np.broadcast(y, xi).shape)
    yb, xb = np.broadcast_arrays(y, xi)
    if np.any(inside):
        out[inside] = np.minimum(K * z0(yb[inside], xb[inside]), 1.0)
    if return_flags:
        return out, ~inside
    return out


def fhat_two_wall(z0: SuperSolutionZ0, K: float, x, v, t):
    """Minimum of the wall-0 f-hat and its reflection (x, v) -> (1-x, -v)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.minimum(fhat_eval(z0, K, x, v, t), fhat_eval(z0, K, 1.0 - x, -v, t))


# ---------------------------------------------------------------------------
# comparison on solver output

def compare_super(traj, bound, region=None, time_shift: float = 0.0):
    """Largest (f - bound)/||f0||_inf over snapshots and region nodes.

    ``bound(x, v, t)`` is evaluated at snapshot time + time_shift;
    ``region(x, v)`` is a boolean node predicate (all nodes when None).
    An infinite bound places no constraint; a NaN bound raises ValueError.
    """
    f0max = traj.sup0 if traj.sup0 > 0 else 1.0
    worst = {"excess": -math.inf, "x": None, "v": None, "t": None}
    for snap in traj.snapshots:
        xx, vv = snap.mesh()
        mask = np.ones(xx.shape, bool) if region is None else np.asarray(region(xx, vv), bool)
        if not mask.any():
            continue
        b = np.asarray(bound(xx[mask], vv[mask], snap.time + time_shift), dtype=float)
        if np.isnan(b).any():
            k = int(np.flatnonzero(np.isnan(b))[0])
            raise ValueError(f"bound is NaN at x={xx[mask][k]}, v={vv[mask][k]}, t={snap.time}")
        ex = (snap.values[mask] - b) / f0max
        k = int(np.argmax(ex))
        if ex[k] > worst["excess"]:
            worst = {"excess": float(ex[k]), "x": float(xx[mask][k]),
                     "v": float(vv[mask][k]), "t": float(snap.time)}
    return worst


# ---------------------------------------------------------------------------
# escape of mass

@dataclass(frozen=True)
class EscapeSubSolution:
    """F = e^{-lam t} h(x - v t, v) with the product cosine cap

        h = A (1 + cos k a)(1 + cos k b),  |a|, |b| <= pi / k,   k = 2 pi / rho,

    (a, b) = (x - x0, v - v0), zero outside.  h is C^1, supported in the
    square of half-side rho/2 (inside the disc of radius rho), and h >= A on
    the square of half-side rho/4.
    """

    center: tuple
    rho: float
    amplitude: float
    lam: float

    @property
    def k(self):
        return 2.0 * math.pi / self.rho

    def _parts(self, x, v):
        a = np.asarray(x, float) - self.center[0]
        b = np.asarray(v, float) - self.center[1]
        k = self.k
        inside = (np.abs(a) <= math.pi / k) & (np.abs(b) <= math.pi / k)
        return a, b, k, inside

    def h(self, x, v):
        a, b, k, inside = self._parts(x, v)
        return np.where(inside, self.amplitude * (1 + np.cos(k * a)) * (1 + np.cos(k * b)), 0.0)

    def lhs(self, x, v, t):
        """h_vv + t^2 h_xx - 2 t h_xv + lam h (>= 0 for a sub-solution)."""
        a, b, k, inside = self._parts(x, v)
        P, Q = 1 + np.cos(k * a), 1 + np.cos(k * b)
        dP, dQ = -k * np.sin(k * a), -k * np.sin(k * b)
        ddP, ddQ = -k * k * np.cos(k * a), -k * k * np.cos(k * b)
        val = self.amplitude * (P * ddQ + t * t * ddP * Q - 2 * t * dP * dQ + self.lam * P * Q)
        return np.where(inside, val, 0.0)

    def F(self, x, v, t):
        return math.exp(-self.lam * t) * self.h(np.asarray(x) - np.asarray(v) * t, v)


def make_escape(center=(0.5, 1.0), rho=0.2, amplitude=0.25, lam=None):
    lam = (2 * math.pi / rho) ** 4 if lam is None else lam
    return EscapeSubSolution(tuple(center), float(rho), float(amplitude), float(lam))


def escape_check(sub: EscapeSubSolution, traj, n_samples: int = 81,
                 time_window: float = 0.2, tol: float = 1e-12):
    """Sub-solution inequality, domination F <= f, and the one-step mass ratio.

    (a) h_vv + t^2 h_xx - 2 t h_xv >= -lam h on a grid of the cap for
        t in [0, 1];
    (b) max over snapshots of F - f (normalised by ||f0||_inf);
    (c) M(1)/M(0), and the flux-based bound 1 - v_lo eps2 (rho/sqrt 2) dt0
        with eps2 = min f / M(0) over a window at the outflow wall x = 1
        (v in v0 +- rho/(2 sqrt 2), t within dt0/2 of the arrival time).
    """
    x0, v0 = sub.center
    half = sub.rho / 2
    xs = np.linspace(x0 - half, x0 + half, n_samples)
    vs = np.linspace(v0 - half, v0 + half, n_samples)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    lhs_min = min(float((sub.lhs(X, V, t) / sub.amplitude).min())
                  for t in np.linspace(0.0, 1.0, 21))
    ok_a = lhs_min >= -tol * sub.lam
    rep = {"lam": sub.lam, "ineq_min": lhs_min, "ineq_ok": bool(ok_a)}
    if traj is None:
        return rep
    m0 = float(traj.mass[0])
    if m0 == 0:
        rep.update({"dominated_excess": 0.0, "mass_ratio": 0.0, "alpha_bound": 1.0,
                    "vacuous": True, "passed": bool(ok_a)})
        return rep
    f0max = traj.sup0
    excess = -math.inf
    for snap in traj.snapshots:
        xx, vv = snap.mesh()
        excess = max(excess, float((sub.F(xx, vv, snap.time) - snap.values).max()) / f0max)
    times = traj.times
    i1 = int(np.argmin(np.abs(times - 1.0)))
    ratio = float(traj.mass[i1] / m0)
    t_arr = (1.0 - x0) / v0 if v0 > 0 else float("nan")
    w = sub.rho / (2 * math.sqrt(2))
    eps2, v_lo = 0.0, max(v0 - w, 0.0)
    snaps = [s for s in traj.snapshots if abs(s.time - t_arr) <= time_window / 2]
    if v0 > 0 and snaps:
        sel = np.abs(snaps[0].v - v0) <= w
        eps2 = min(float(s.values[-1, sel].min()) for s in snaps) / m0
    bound = 1.0 - v_lo * eps2 * (sub.rho / math.sqrt(2)) * time_window
    rep.update({
        "dominated_excess": excess, "mass_ratio": ratio, "eps2": eps2,
        "alpha_bound": bound, "window_snapshots": len(snaps),
        "passed": bool(ok_a and excess <= 1e-12 and ratio <= bound and ratio < 1),
    })
    return rep


# ---------------------------------------------------------------------------
# barriers at infinity

@dataclass
class Barrier:
    kind: str
    params: dict
    fn: object = field(repr=False)
    residual: object = field(repr=False)
    min_residual: float = float("nan")

    def __call__(self, v, t):
        return self.fn(np.asarray(v, float), np.asarray(t, float))


def infinity_barrier(kind: str, v_samples=None, t_samples=None, **params) -> Barrier:
    """Super-solution phi(v, t) of phi_t + v phi_x - phi_vv >= 0.

    kind="quadratic": phi = a0(t) + a1(t) v^2, with preset="linear"
    ((2t+1, 1)) or preset="exp" ((e^{2t}, e^{2t})).
    kind="exp_tail": phi = e^{theta t} e^{-A sqrt(v^2 + 1)}; theta is found
    by bisection as the smallest value with non-negative sampled residual
    when not given.

    Raises
    ------
    ValueError
        If the sampled residual is negative.
    """
    vs = np.linspace(-50, 50, 2001) if v_samples is None else np.asarray(v_samples, float)
    ts = np.linspace(0, 5, 11) if t_samples is None else np.asarray(t_samples, float)
    V, T = np.meshgrid(vs, ts, indexing="ij")
    if kind == "quadratic":
        preset = params.get("preset", "linear")
        if preset == "linear":
            fn = lambda v, t: (2 * t + 1) + v**2
            res = lambda v, t: 2.0 + 0 * v - 2.0
        elif preset == "exp":
            fn = lambda v, t: np.exp(2 * t) * (1 + v**2)
            res = lambda v, t: 2 * np.exp(2 * t) * (1 + v**2) - 2 * np.exp(2 * t)
        else:
            raise ValueError(f"unknown quadratic preset {preset!r}")
        params = {"preset": preset}
    elif kind == "exp_tail":
        A = float(params.get("A", 1.0))

        def ratio(v):
            s = np.sqrt(v * v + 1)
            return A * A * v * v / (s * s) - A / s**3   # phi_vv / phi

        theta = params.get("theta")
        if theta is None:
            lo, hi = 0.0, A * A + A + 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if np.all(mid - ratio(vs) >= 0):
                    hi = mid
                else:
                    lo = mid
            theta = hi
        theta = float(theta)
        fn = lambda v, t: np.exp(theta * t - A * np.sqrt(v * v + 1))
        res = lambda v, t: fn(v, t) * (theta - ratio(v))
        params = {"A": A, "theta": theta}
    else:
        raise ValueError(f"unknown barrier kind {kind!r}")
    r = res(V, T)
    scale = np.maximum(np.abs(fn(V, T)), 1e-300)
    min_res = float((r / scale).min())
    if min_res < -1e-12:
        raise ValueError(f"{kind} barrier violates the inequality (min residual {min_res})")
    return Barrier(kind, params, fn, res, min_res)
