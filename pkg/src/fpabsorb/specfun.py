"""Gamma, confluent hypergeometric functions and the self-similar profile.

Everything here works on real arguments.  ``kummer_m`` and ``tricomi_u`` are
scalar routines; ``lambda_profile`` accepts arrays.

The profile is

    Lambda(zeta) = U(-alpha, 2/3, -zeta**3),

the solution of  Lambda'' + 3 zeta^2 Lambda' - 9 alpha zeta Lambda = 0  that
grows like |zeta|**(3 alpha) on both sides.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

__all__ = [
    "gamma_fn",
    "kummer_m",
    "kummer_m_deriv",
    "tricomi_u",
    "lambda_profile",
    "lambda_lamb",
    "k_plus",
    "check_alpha",
]

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SERIES_MAX = 40.0  # -z above which the algebraic asymptotic form of M is used
_SERIES_MAX_POS = 600.0  # positive series sums are cancellation-free up to overflow
_U_ASYM = 35.0      # z above which the asymptotic series of U is used
_U_SMALL = 2.0      # z below which U comes straight from the connection formula
_EPS = 1e-17


def _is_nonpos_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def gamma_fn(x: float) -> float:
    """Gamma function of a real argument.

    Lanczos approximation for x >= 1/2, reflection formula below.

    Raises
    ------
    ValueError
        At the poles x = 0, -1, -2, ...
    """
    x = float(x)
    if _is_nonpos_int(x):
        raise ValueError(f"gamma_fn: pole at x = {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    # split the power to stay finite up to x ~ 171
    half = t ** (0.5 * (x + 0.5))
    return math.sqrt(2 * math.pi) * half * (half * math.exp(-t)) * acc


def _rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles."""
    if _is_nonpos_int(x):
        return 0.0
    return 1.0 / gamma_fn(x)


def _poch_series(a, b, z, nmax=None):
    """Plain sum of (a)_n / (b)_n z^n / n! with a safe stopping rule."""
    term = 1.0
    total = 1.0
    comp = 0.0
    # terms are monotone decreasing only once n exceeds roughly |a| + |b| + |z|
    n_safe = abs(a) + abs(b) + abs(z) + 2
    n = 0
    while True:
        if nmax is not None and n >= nmax:
            break
        term *= (a + n) / (b + n) * z / (n + 1)
        n += 1
        # Kahan summation; the positive-z sums can reach e^40
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        if term == 0.0 or (n > n_safe and abs(term) < _EPS * abs(total)):
            break
        if n > 10_000:
            raise ArithmeticError("kummer_m: series did not converge")
    return total


def _asym_sum(p, q, r, sign):
    """sum_s (p)_s (q)_s / s! (sign/r)^s, truncated at the smallest term."""
    term = 1.0
    total = 1.0
    prev = math.inf
    s = 0
    while True:
        nxt = term * (p + s) * (q + s) / (s + 1) * sign / r
        if abs(nxt) >= prev or nxt == 0.0:
            break
        s += 1
        prev = abs(nxt)
        term = nxt
        total += term
        if abs(term) < _EPS * abs(total):
            break
    return total


def kummer_m(a: float, b: float, z: float) -> float:
    """Kummer's function M(a, b, z) = 1F1(a; b; z) for real arguments.

    Power series for |z| <= 40 (negative z through Kummer's transformation so
    that no alternating sum is formed), asymptotic expansions beyond.

    Raises
    ------
    ValueError
        If b is a non-positive integer.
    OverflowError
        If the result does not fit in a double.
    """
    a, b, z = float(a), float(b), float(z)
    if _is_nonpos_int(b):
        raise ValueError(f"kummer_m: b = {b} is a pole")
    if z == 0.0 or a == 0.0:
        return 1.0
    if _is_nonpos_int(a):
        return _poch_series(a, b, z, nmax=int(-a))
    if z < 0:
        if _is_nonpos_int(b - a):
            return math.exp(z) * _poch_series(b - a, b, -z, nmax=int(a - b))
        r = -z
        if r <= _SERIES_MAX:
            return math.exp(z) * _poch_series(b - a, b, r)
        # algebraic part; the e^{-r} companion is below double precision here
        return gamma_fn(b) * _rgamma(b - a) * r ** (-a) * _asym_sum(a, a - b + 1, r, 1.0)
    if z <= _SERIES_MAX_POS:
        # the asymptotic form on this side drops a term that is only
        # exponentially small once z is a few hundred
        return _poch_series(a, b, z)
    logmag = z + (a - b) * math.log(z)
    if logmag > 700:
        raise OverflowError(f"kummer_m: M({a}, {b}, {z}) overflows")
    pref = gamma_fn(b) * _rgamma(a)
    return pref * math.exp(logmag) * _asym_sum(1 - a, b - a, z, 1.0)


def kummer_m_deriv(a: float, b: float, z: float, order: int = 1) -> float:
    """d^k/dz^k M(a, b, z) = (a)_k / (b)_k M(a+k, b+k, z)."""
    coef = 1.0
    for k in range(order):
        coef *= (a + k) / (b + k)
    if coef == 0.0:
        return 0.0
    return coef * kummer_m(a + order, b + order, z)


def _real_power(z: float, p: float) -> float:
    """z**p for z < 0 when p has denominator 3 (real cube-root branch)."""
    if z >= 0:
        return z**p
    k = 3 * p
    if abs(k - round(k)) > 1e-12:
        raise ValueError("negative z needs 1 - b to be a multiple of 1/3")
    return np.cbrt(z) ** int(round(k))


def _u_connection(a, b, z):
    # U = Gamma(1-b)/Gamma(a-b+1) M(a,b,z) + Gamma(b-1)/Gamma(a) z^{1-b} M(a-b+1,2-b,z)
    t1 = gamma_fn(1 - b) * _rgamma(a - b + 1) * kummer_m(a, b, z)
    c2 = gamma_fn(b - 1) * _rgamma(a)
    t2 = 0.0 if c2 == 0.0 else c2 * _real_power(z, 1 - b) * kummer_m(a - b + 1, 2 - b, z)
    return math.fsum((t1, t2))


def _u_integral(a, b, z):
    # U = 1/Gamma(a) int_0^inf e^{-zt} t^{a-1} (1+t)^{b-a-1} dt, a > 0
    top = 50.0 / z
    val, _ = integrate.quad(
        lambda t: math.exp(-z * t) * (1 + t) ** (b - a - 1),
        0.0, top, weight="alg", wvar=(a - 1, 0.0),
        epsabs=0.0, epsrel=2e-14, limit=200,
    )
    return val / gamma_fn(a)


def _u_positive(a, b, z):
    if z >= _U_ASYM:
        return z ** (-a) * _asym_sum(a, a - b + 1, z, -1.0)
    if z <= _U_SMALL:
        return _u_connection(a, b, z)
    if a > 0:
        return _u_integral(a, b, z)
    if a - b + 1 > 0:
        return z ** (1 - b) * _u_integral(a - b + 1, 2 - b, z)
    # climb to positive a, then recur downwards (stable in this direction)
    m = int(math.floor(-a)) + 1
    top = a + m
    u_hi = _u_positive(top + 1, b, z)
    u = _u_positive(top, b, z)
    for k in range(m):
        c = top - k
        u_hi, u = u, (z + 2 * c - b) * u - c * (c - b + 1) * u_hi
    return u


def tricomi_u(a: float, b: float, z: float) -> float:
    """Tricomi's function U(a, b, z) for real z and non-integer b.

    For z < 0 the real branch of z**(1-b) is taken, which requires 3b to be
    an integer (all cases used here: b = 2/3, 4/3, 5/3).

    Raises
    ------
    ValueError
        For integer b, or z = 0 with b >= 1.
    """
    a, b, z = float(a), float(b), float(z)
    if b == math.floor(b):
        raise ValueError(f"tricomi_u: integer b = {b} not supported")
    if a == 0.0:
        return 1.0
    if _is_nonpos_int(a):
        n = int(-a)
        poch = 1.0
        for k in range(n):
            poch *= b + k
        return (-1) ** n * poch * kummer_m(a, b, z)
    if z == 0.0:
        if b >= 1:
            raise ValueError("tricomi_u: singular at z = 0 for b >= 1")
        return gamma_fn(1 - b) * _rgamma(a - b + 1)
    if z > 0:
        return _u_positive(a, b, z)
    return _u_connection(a, b, z)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0 / 6.0:
        raise ValueError(f"alpha must lie in (0, 1/6), got {alpha}")
    return alpha


def k_plus(alpha: float) -> float:
    """Limit of Lambda(zeta)/zeta**(3 alpha) as zeta -> +inf."""
    alpha = check_alpha(alpha)
    return 2.0 * math.cos(math.pi * (alpha + 1.0 / 3.0))


def lambda_lamb(alpha: float, zeta: float) -> float:
    """Lambda from the explicit two-term Kummer representation.

    Accurate for zeta > -2; for more negative zeta the two terms are of size
    e^{|zeta|^3} and cancel, so ``lambda_profile`` switches to U.
    """
    alpha = check_alpha(alpha)
    z = -zeta**3
    pref = math.pi / math.sin(2 * math.pi / 3)
    t1 = kummer_m(-alpha, 2 / 3, z) / (gamma_fn(1 / 3 - alpha) * gamma_fn(2 / 3))
    t2 = zeta * kummer_m(1 / 3 - alpha, 4 / 3, z) / (gamma_fn(-alpha) * gamma_fn(4 / 3))
    return pref * math.fsum((t1, t2))


def _lambda_scalar(alpha, zeta):
    if zeta >= 0:
        return lambda_lamb(alpha, zeta)
    # z = |zeta|^3 > 0: U(-alpha, 2/3, z) has no cancellation on this side
    return tricomi_u(-alpha, 2 / 3, -zeta**3)


def lambda_profile(alpha: float, zeta):
    """Self-similar profile Lambda(zeta) for 0 < alpha < 1/6.

    Parameters
    ----------
    alpha : float
        Exponent, 0 < alpha < 1/6.
    zeta : float or array_like
        Similarity variable v / (9x)^{1/3}.

    Returns
    -------
    float or ndarray
        Strictly positive values of Lambda.
    """
    alpha = check_alpha(alpha)
    if np.ndim(zeta) == 0:
        return _lambda_scalar(alpha, float(zeta))
    zeta = np.asarray(zeta, dtype=float)
    out = np.empty_like(zeta)
    flat = out.reshape(-1)
    for i, zt in enumerate(zeta.reshape(-1)):
        flat[i] = _lambda_scalar(alpha, float(zt))
    return out
