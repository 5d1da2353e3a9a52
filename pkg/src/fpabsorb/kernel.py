"""Whole-space fundamental solution and the boundary-layer constructions.

G(x, v, nu, tau) is the density at (x, v) after time tau of the process
dX = V dt, dV = sqrt(2) dW started from (0, nu):

    G = sqrt(3) / (2 pi tau^2)
        * exp(-3 (x - tau (v + nu) / 2)^2 / tau^3 - (v - nu)^2 / (4 tau)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from .fields import PhaseField, Trajectory

__all__ = [
    "eval_g",
    "gaussian_moments",
    "gaussian_density",
    "free_propagate",
    "GridResolutionError",
    "QuadratureError",
    "LimitReport",
    "limit_identity_check",
    "layer_integral",
    "boundary_kernel",
    "BoundaryDensity",
    "solve_boundary_density",
    "backward_transform",
]

_SQ3_2PI = math.sqrt(3.0) / (2.0 * math.pi)


class GridResolutionError(ValueError):
    """Raised when a quadrature grid cannot deliver the requested accuracy."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature gave up; ``level`` records the refinement reached."""

    def __init__(self, msg, level=None):
        super().__init__(msg)
        self.level = level


def eval_g(x, v, nu, tau):
    """Fundamental solution G(x, v, nu, tau); broadcasts over arrays.

    ``x`` is the position offset x - xi.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("eval_g: tau must be positive")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.asarray(nu, dtype=float)
    drift = x - 0.5 * tau * (v + nu)
    expo = -3.0 * drift**2 / tau**3 - (v - nu) ** 2 / (4.0 * tau)
    out = _SQ3_2PI / tau**2 * np.exp(expo)
    return out if out.ndim else float(out)


def gaussian_moments(mean, cov, t):
    """Mean and covariance of a Gaussian initial datum after time t.

    Exact in the whole space: (x, v) -> (x + t v, v) plus the covariance of
    the integrated Brownian motion.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    a = np.array([[1.0, t], [0.0, 1.0]])
    noise = np.array([[2 * t**3 / 3, t**2], [t**2, 2 * t]])
    return a @ mean, a @ cov @ a.T + noise


def gaussian_density(x, v, mean, cov, mass=1.0):
    """Bivariate normal density in (x, v)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    cov = np.asarray(cov, dtype=float)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[0, 1], cov[0, 0]]]) / det
    dx = x - mean[0]
    dv = v - mean[1]
    q = inv[0, 0] * dx**2 + 2 * inv[0, 1] * dx * dv + inv[1, 1] * dv**2
    return mass * np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))


def free_propagate(f0: PhaseField, t: float, out_x=None, out_v=None,
                   tol: float = 1e-6, chunk: int = 256) -> PhaseField:
    """Whole-space solution at time t by quadrature against G.

    The output grid defaults to the input grid.  If the output field does not
    carry the input mass to relative accuracy ``tol`` the grid is too coarse
    or too narrow and ``GridResolutionError`` is raised.
    """
    if t <= 0:
        raise ValueError("free_propagate: t must be positive")
    out_x = f0.x if out_x is None else np.asarray(out_x, dtype=float)
    out_v = f0.v if out_v is None else np.asarray(out_v, dtype=float)
    src = f0.values * np.outer(f0.wx, f0.wv)
    keep = src != 0
    xi = np.broadcast_to(f0.x[:, None], src.shape)[keep]
    nu = np.broadcast_to(f0.v[None, :], src.shape)[keep]
    wsrc = src[keep]

    xo, vo = np.meshgrid(out_x, out_v, indexing="ij")
    xo, vo = xo.ravel(), vo.ravel()
    vals = np.zeros(xo.size)
    for start in range(0, xo.size, chunk):
        sl = slice(start, start + chunk)
        g = eval_g(xo[sl, None] - xi[None, :], vo[sl, None], nu[None, :], t)
        vals[sl] = g @ wsrc
    out = PhaseField(out_x, out_v, vals.reshape(out_x.size, out_v.size), f0.time + t)
    m0 = f0.mass()
    if m0 > 0:
        rel = abs(out.mass() - m0) / m0
        if rel > tol:
            raise GridResolutionError(
                f"free_propagate: mass drift {rel:.3e} exceeds tol {tol:.1e}; "
                "refine or widen the grid"
            )
    return out


# ---------------------------------------------------------------------------
# boundary limit of the layer potential

@dataclass
class LimitReport:
    x: np.ndarray
    lhs: np.ndarray
    rhs: float
    abs_err: np.ndarray
    monotone: bool

    def rows(self):
        return [(float(a), float(b), self.rhs, float(c))
                for a, b, c in zip(self.x, self.lhs, self.abs_err)]


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _inner_w(lambda_fn, x, v, tau, s, support):
    """int dw lambda(w, s) exp(-(w - c)^2 / tau), c the Gaussian centre.

    Completing the square in w turns the exponent of G into
    -(w - c)^2 / tau - 3 (x - tau v)^2 / (4 tau^3).
    """
    c = v + 1.5 * (x / tau - v)
    half = 8.0 * math.sqrt(tau)
    lo, hi = c - half, c + half
    if support is not None:
        lo, hi = max(lo, support[0]), min(hi, support[1])
        if hi <= lo:
            return 0.0
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
    w = mid + rad * _GL_NODES
    vals = np.asarray(lambda_fn(w, np.full_like(w, s)), dtype=float)
    return rad * float(np.sum(_GL_WEIGHTS * vals * np.exp(-((w - c) ** 2) / tau)))


def layer_integral(lambda_fn, x, v, t, support=None, epsabs=1e-13, epsrel=1e-11):
    """int_0^t ds int dw lambda(w, s) G(x, v, w, t - s).

    The integrand in tau = t - s has a spike of width ~ (x/v)^{3/2} at
    tau = x/v; it is passed to the adaptive rule as a breakpoint.
    """
    if x < 0:
        raise ValueError("layer_integral: x must be non-negative")

    def integrand(tau):
        if tau <= 0:
            return 0.0
        damp = math.exp(-3.0 * (x - tau * v) ** 2 / (4.0 * tau**3))
        if damp == 0.0:
            return 0.0
        return _SQ3_2PI / tau**2 * damp * _inner_w(lambda_fn, x, v, tau, t - tau, support)

    points = []
    if x > 0 and v > 0:
        tau0 = x / v
        width = math.sqrt(2.0 * tau0**3 / (3.0 * v * v))
        points = [p for p in (tau0 - 30 * width, tau0 - 5 * width, tau0,
                              tau0 + 5 * width, tau0 + 30 * width) if 0 < p < t]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, 0.0, t, points=points or None,
                                      epsabs=epsabs, epsrel=epsrel, limit=1000)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"layer_integral at x={x}: {exc}", level=1000) from exc
    return val


def limit_identity_check(lambda_fn, v: float, t: float, x_sequence, support=None):
    """Compare the layer potential at small x with its limit at x = 0.

    LHS(x) = int_0^t int lambda(w,s) G(x, v, w, t-s) dw ds,
    RHS    = lambda(v, t) / v + int_0^t int lambda(w,s) G(0, v, w, t-s) dw ds.

    Parameters
    ----------
    lambda_fn : callable
        Vectorised lambda(w, s).
    support : (float, float), optional
        Interval in w outside of which lambda vanishes.
    """
    if v <= 0:
        raise ValueError("limit_identity_check: v must be positive")
    xs = np.asarray(x_sequence, dtype=float)
    lam_vt = float(np.asarray(lambda_fn(np.array([v]), np.array([t])))[0])
    rhs = lam_vt / v + layer_integral(lambda_fn, 0.0, v, t, support)
    lhs = np.array([layer_integral(lambda_fn, float(x), v, t, support) for x in xs])
    err = np.abs(lhs - rhs)
    order = np.argsort(-xs)
    monotone = bool(np.all(np.diff(err[order]) <= 0))
    return LimitReport(xs, lhs, rhs, err, monotone)


# ---------------------------------------------------------------------------
# boundary-layer density

def boundary_kernel(v, w, tau):
    """Kernel of the density equation, K(v, w, tau) = -v G(0, -v, -w, tau).

    For v < 0 the layer potential int_t^{t0} ds int dw lambda(w,s)
    G(x, -v, -w, s-t) is the forward one in the reflected variables
    (w, s) -> (-w, t0 - s), so as x -> 0+ it tends to -lambda(v,t)/v plus its
    value at x = 0.  Requiring phi_bar plus the layer to vanish at x = 0 gives

        lambda = v phi_bar(0, v, t) + v int_t^{t0} int lambda G(0, -v, -w, s-t)
               = q + int_{t0}^{t} int lambda K,

    i.e. source q = v phi_bar(0, v, t) and this kernel.
    """
    return -np.asarray(v) * eval_g(0.0, -np.asarray(v), -np.asarray(w), tau)


@dataclass
class BoundaryDensity:
    w: np.ndarray
    t: np.ndarray
    values: np.ndarray          # shape (len(w), len(t))
    support: tuple
    iterations: int
    ratios: np.ndarray          # successive-difference sup-norm ratios
    residual: float
    kernel_fit: dict = field(default_factory=dict)
    _spline: object = field(default=None, repr=False, compare=False)

    def __call__(self, w, s):
        """Bicubic spline interpolation, zero outside the velocity window."""
        if self._spline is None:
            self._spline = interpolate.RectBivariateSpline(self.w, self.t, self.values)
        w = np.asarray(w, dtype=float)
        s = np.clip(np.asarray(s, dtype=float), self.t[0], self.t[-1])
        out = self._spline.ev(np.clip(w, self.w[0], self.w[-1]), s)
        inside = (w >= self.support[0]) & (w <= self.support[1])
        return np.where(inside, out, 0.0)


def _trap(n, h):
    wts = np.full(n, h)
    wts[0] = wts[-1] = 0.5 * h
    return wts


def fit_kernel_envelope(v, w, taus):
    """Fit |K| <= C exp(-A / tau) on the window.

    A comes from a least-squares line through log max|K| against 1/tau over
    tau <= 1; C is then the smallest constant making the envelope hold at
    every sample.
    """
    vv, ww = np.meshgrid(v, w, indexing="ij")
    peaks = np.array([np.abs(boundary_kernel(vv, ww, tau)).max() for tau in taus])
    use = (taus <= 1.0) & (peaks > 1e-300)
    slope, _ = np.polyfit(1.0 / taus[use], np.log(peaks[use]), 1)
    a_fit = -slope
    with np.errstate(over="ignore"):
        c_fit = float(np.max(peaks * np.exp(a_fit / taus)))
    return {"A": float(a_fit), "C": c_fit, "tau": taus, "peak": peaks}


def solve_boundary_density(q, window=(-1.4, -0.6), t0: float = 1.0,
                           nw: int = 81, nt: int = 201, tol: float = 1e-10,
                           max_iter: int = 200) -> BoundaryDensity:
    """Picard iteration for lambda = q + int_{t0}^{t} int lambda(w,s) K(v,w,s-t).

    Trapezoid rules in w over the window and in s over [t, t0].

    Parameters
    ----------
    q : callable
        Source q(v, t), vectorised.
    window : (float, float)
        Velocity window, entirely in v < 0.
    """
    lo, hi = window
    if not lo < hi < 0:
        raise ValueError("window must lie in v < 0")
    w = np.linspace(lo, hi, nw)
    t = np.linspace(0.0, t0, nt)
    h = t[1] - t[0]
    ww = _trap(nw, w[1] - w[0])
    src = np.asarray(q(w[:, None], t[None, :]), dtype=float) * np.ones((nw, nt))

    taus = h * np.arange(nt)
    kern = np.zeros((nt, nw, nw))
    vv, wg = np.meshgrid(w, w, indexing="ij")
    for d in range(1, nt):
        kern[d] = boundary_kernel(vv, wg, taus[d]) * ww[None, :]

    def apply(lam):
        # (A lam)(v, t_k) = -int_{t_k}^{t0} ds int dw K(v, w, s - t_k) lam(w, s)
        acc = np.zeros_like(lam)
        for d in range(1, nt):
            acc[:, : nt - d] += kern[d] @ lam[:, d:]
        # trapezoid: the far end s = t0 carries half weight (K vanishes at d = 0)
        acc[:, : nt - 1] -= 0.5 * np.einsum("dvw,w->vd", kern[:0:-1], lam[:, -1])
        return -h * acc

    lam = src.copy()
    diffs = []
    it = 0
    for it in range(1, max_iter + 1):
        new = src + apply(lam)
        diffs.append(float(np.max(np.abs(new - lam))))
        lam = new
        if diffs[-1] < tol:
            break
    d = np.array(diffs)
    ratios = d[1:] / np.where(d[:-1] > 0, d[:-1], 1.0) if d.size > 1 else np.zeros(0)
    if ratios.size and np.any(ratios[np.isfinite(ratios)] >= 1.0) and d[-1] >= tol:
        raise ArithmeticError(f"Picard iteration not contracting, ratios {ratios}")
    residual = float(np.max(np.abs(lam - src - apply(lam))))
    fit = fit_kernel_envelope(w, w, taus[1:])
    return BoundaryDensity(w, t, lam, (lo, hi), it, ratios, residual, fit)


# ---------------------------------------------------------------------------

def backward_transform(traj: Trajectory, T: float) -> Trajectory:
    """g(x, v, t) = f(x, -v, T - t) on every snapshot.

    Requires a velocity grid symmetric about 0.  Snapshots come back sorted
    by the new time.  Applying the transform twice returns the input.
    """
    out = []
    for snap in traj.snapshots:
        if not np.allclose(snap.v, -snap.v[::-1], atol=1e-14):
            raise ValueError("backward_transform: velocity grid must be symmetric")
        out.append(PhaseField(snap.x, snap.v, snap.values[:, ::-1].copy(),
                              T - snap.time, snap.wx, snap.wv[::-1].copy()))
    out.sort(key=lambda s: s.time)
    return Trajectory(snapshots=out, meta={**traj.meta, "backward_T": T})
