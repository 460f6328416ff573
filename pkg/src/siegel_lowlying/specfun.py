"""Bessel kernels, digamma and Gauss-Legendre quadrature.

Everything here is double precision and deterministic. Half-integer order
Bessel functions are evaluated from their elementary closed forms
(upward recurrence from J_{1/2}, J_{3/2}) where that recurrence is stable,
from the ascending series for small arguments, and by Miller's backward
recurrence normalised with J_{1/2}^2 + J_{-1/2}^2 = 2/(pi x) in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

UNDERFLOW = 1e-300
_LOG_UNDERFLOW = math.log(UNDERFLOW)
_RESCALE = 1e250


class ConvergenceError(RuntimeError):
    """Raised when an adaptive procedure hits its cap without converging."""

    def __init__(self, message: str, iterates: tuple[float, float] | None = None):
        super().__init__(message)
        self.iterates = iterates


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _legendre_newton(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [-1, 1] by Newton iteration from Tricomi's initial guesses."""
    k = np.arange(1, n // 2 + 1, dtype=float)
    theta = np.pi * (4 * k - 1) / (4 * n + 2)
    x = (1 - (n - 1) / (8.0 * n ** 3)) * np.cos(theta)
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if dx.size == 0 or np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    if n % 2:
        # middle node x = 0, where P_n'(0) = n P_{n-1}(0)
        xs = np.concatenate([-x, [0.0], x[::-1]])
        wmid = 2.0 / (n * _legendre_at_zero(n - 1)) ** 2
        ws = np.concatenate([w, [wmid], w[::-1]])
    else:
        xs = np.concatenate([-x, x[::-1]])
        ws = np.concatenate([w, w[::-1]])
    return xs, ws


def _legendre_at_zero(n: int) -> float:
    val = 1.0
    if n % 2:
        return 0.0
    for j in range(1, n // 2 + 1):
        val *= -(2 * j - 1) / (2 * j)
    return val


@lru_cache(maxsize=None)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _legendre_newton(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [a, b] (exact to degree 2n - 1)."""
    if n < 2:
        raise ValueError(f"gauss_legendre needs n >= 2, got {n}")
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return QuadratureRule(mid + half * x, half * w)


def panel_rule(breaks: np.ndarray, n: int = 16) -> QuadratureRule:
    """Composite Gauss-Legendre rule with n nodes on each panel."""
    x, w = _leggauss(n)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return QuadratureRule(nodes, weights)


# --------------------------------------------------------------------------
# half-integer order Bessel functions


def _half_order_index(nu: float) -> int:
    n = nu - 0.5
    if n < 0 or abs(n - round(n)) > 1e-12:
        raise ValueError(f"order must be a half-integer >= 1/2, got {nu}")
    return int(round(n))


def bessel_envelope_log(nu: float, x: np.ndarray | float):
    """log of (x/2)^nu / Gamma(nu+1), the classical upper bound for |J_nu(x)|."""
    return nu * np.log(np.asarray(x, dtype=float) / 2.0) - math.lgamma(nu + 1.0)


def _series(nu: float, x: np.ndarray) -> np.ndarray:
    # ascending series, only used where x^2 <= 4(nu+1) so the terms decrease
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for j in range(1, 200):
        term = term * q / (j * (nu + j))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    logpre = bessel_envelope_log(nu, x)
    out = np.where(logpre < _LOG_UNDERFLOW, 0.0, np.exp(np.maximum(logpre, -745.0)) * total)
    return out


def _upward(n: int, x: np.ndarray) -> np.ndarray:
    s = np.sin(x)
    c = np.cos(x)
    pre = np.sqrt(2.0 / (np.pi * x))
    j0 = pre * s
    if n == 0:
        return j0
    j1 = pre * (s / x - c)
    for k in range(1, n):
        mu = k + 0.5
        j0, j1 = j1, (2.0 * mu / x) * j1 - j0
    return j1


def _miller(n: int, x: np.ndarray) -> np.ndarray:
    # downward recurrence on orders mu = k + 1/2, k = top .. -1
    top = n + 20 + int(math.ceil(10.0 * float(np.max(x)) ** (1.0 / 3.0)))
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-30)
    f_target = np.zeros_like(x)
    for k in range(top, -1, -1):
        mu = k + 0.5
        if k == n:
            f_target = f.copy()
        f_prev = (2.0 * mu / x) * f - f_next
        f_next, f = f, f_prev
        big = np.abs(f) > _RESCALE
        if np.any(big):
            f = np.where(big, f / _RESCALE, f)
            f_next = np.where(big, f_next / _RESCALE, f_next)
            # the stored order-n value must follow every rescale made after it
            f_target = np.where(big & (k <= n), f_target / _RESCALE, f_target)
    # after the loop: f_next ~ J_{1/2}, f ~ J_{-1/2}
    g_half, g_mhalf = f_next, f
    norm = np.sqrt(2.0 / (np.pi * x)) / np.hypot(g_half, g_mhalf)
    sin_side = np.abs(np.sin(x)) >= np.abs(np.cos(x))
    sign = np.where(sin_side, np.sign(np.sin(x)) * np.sign(g_half),
                    np.sign(np.cos(x)) * np.sign(g_mhalf))
    return sign * f_target * norm


def bessel_j_half_array(nu: float, x) -> np.ndarray:
    """Vectorised J_nu(x) for half-integer nu >= 1/2 and x > 0.

    Values whose envelope (x/2)^nu / Gamma(nu+1) is below 1e-300 are returned
    as exact zeros (see :func:`bessel_j_half` for the flag).
    """
    n = _half_order_index(nu)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_j_half requires x > 0")
    flat = x.ravel()
    out = np.zeros_like(flat)
    env = bessel_envelope_log(nu, flat)
    live = env >= _LOG_UNDERFLOW
    up = live & (flat >= nu)
    ser = live & ~up & (flat * flat <= 4.0 * (nu + 1.0))
    mil = live & ~up & ~ser
    if np.any(up):
        out[up] = _upward(n, flat[up])
    if np.any(ser):
        out[ser] = _series(nu, flat[ser])
    if np.any(mil):
        out[mil] = _miller(n, flat[mil])
    return out.reshape(x.shape)


def bessel_j_half(nu: float, x: float) -> tuple[float, bool]:
    """J_nu(x) for half-integer nu; returns (value, underflowed)."""
    if x <= 0:
        raise ValueError(f"bessel_j_half requires x > 0, got {x}")
    if bessel_envelope_log(nu, x) < _LOG_UNDERFLOW:
        return 0.0, True
    return float(bessel_j_half_array(nu, np.array([x]))[0]), False


# --------------------------------------------------------------------------
# integer order


def bessel_j_int_orders(nmax: int, x) -> np.ndarray:
    """J_0..J_nmax at each x (shape (nmax+1, len(x))), Miller's algorithm.

    Normalised with J_0 + 2 sum J_{2k} = 1, which is valid for all x > 0.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    xm = float(np.max(x))
    top = max(nmax, int(xm)) + 30 + int(math.ceil(12.0 * xm ** (1.0 / 3.0)))
    top += top % 2
    vals = np.zeros((nmax + 1, x.size))
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(top, 0, -1):
        if k <= nmax:
            vals[k] = f
        if k % 2 == 0:
            norm += 2.0 * f
        f_prev = (2.0 * k / x) * f - f_next
        f_next, f = f, f_prev
        big = np.abs(f) > _RESCALE
        if np.any(big):
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            f = f * scale
            f_next = f_next * scale
            norm = norm * scale
            vals[k:] *= scale
    vals[0] = f
    norm += f
    return vals / norm


def bessel_j_int(n: int, x) -> np.ndarray:
    """J_n(x) for integer n >= 0 (vectorised in x)."""
    if n < 0:
        raise ValueError("integer order must be >= 0")
    return bessel_j_int_orders(n, x)[n]


# --------------------------------------------------------------------------
# the theta-integral kernel


def _wallis(p: float) -> float:
    """int_0^{pi/2} sin^p."""
    return 0.5 * math.sqrt(math.pi) * math.exp(math.lgamma((p + 1) / 2) - math.lgamma(p / 2 + 1))


def script_j_envelope(lambda1: float, lambda2: float, ell: float) -> float:
    """Rigorous upper bound for |script_j(lambda1, lambda2, ell)|.

    Uses |J_l(x)| <= (x/2)^l / Gamma(l+1) and |J_l(x)| <= 1.
    """
    lo, hi = sorted((lambda1, lambda2))
    a1 = math.exp(bessel_envelope_log(ell, 4 * math.pi * math.sqrt(lo)))
    a2 = math.exp(bessel_envelope_log(ell, 4 * math.pi * math.sqrt(hi)))
    return min(1.0, a1 * _wallis(ell + 1), a1 * a2 * _wallis(2 * ell + 1))


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    nodes: int


def script_j(lambda1: float, lambda2: float, ell: float, tol: float = 1e-12,
             max_nodes: int = 16 * 2 ** 10) -> QuadResult:
    """int_0^{pi/2} J_l(4 pi sqrt(l1) sin t) J_l(4 pi sqrt(l2) sin t) sin t dt."""
    if lambda1 <= 0 or lambda2 <= 0:
        raise ValueError("eigenvalues must be positive")
    x1 = 4 * math.pi * math.sqrt(lambda1)
    x2 = 4 * math.pi * math.sqrt(lambda2)
    # start with enough nodes to resolve the faster oscillation
    n = 16
    while n < max_nodes and n < 2.0 * max(x1, x2):
        n *= 2

    def rule(m):
        r = gauss_legendre(m, 0.0, math.pi / 2)
        s = np.sin(r.nodes)
        vals = bessel_j_half_array(ell, x1 * s) * bessel_j_half_array(ell, x2 * s) * s
        return r.integrate(vals)

    prev = rule(n)
    while True:
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err < tol or err < tol * abs(cur):
            return QuadResult(cur, err, n)
        if n >= max_nodes:
            raise ConvergenceError(
                f"script_j did not converge (l1={lambda1}, l2={lambda2}, ell={ell})",
                (prev, cur))
        prev = cur


def bessel_product_rhs(v: float, z: float, zeta: float, tol: float = 1e-13,
                       max_nodes: int = 16 * 2 ** 10) -> QuadResult:
    """(2/pi) int_0^{pi/2} cos((z - zeta) cos a) J_{2v}(2 sqrt(z zeta) sin a) da."""
    order = int(round(2 * v))
    if abs(order - 2 * v) > 1e-12 or order < 1:
        raise ValueError("2v must be a positive integer")
    if z <= 0 or zeta <= 0:
        raise ValueError("z and zeta must be positive")
    w = 2.0 * math.sqrt(z * zeta)
    n = 16
    while n < 2.0 * (w + abs(z - zeta)):
        n *= 2

    def rule(m):
        r = gauss_legendre(m, 0.0, math.pi / 2)
        vals = np.cos((z - zeta) * np.cos(r.nodes)) * bessel_j_int(order, w * np.sin(r.nodes))
        return 2.0 / math.pi * r.integrate(vals)

    prev = rule(n)
    while True:
        n *= 2
        cur = rule(n)
        err = abs(cur - prev)
        if err < tol:
            return QuadResult(cur, err, n)
        if n >= max_nodes:
            raise ConvergenceError("product formula quadrature did not converge", (prev, cur))
        prev = cur


# --------------------------------------------------------------------------
# digamma

_BERN = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)


def digamma(z):
    """psi(z) for real or complex z with Re z > 0 (vectorised)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        bad = z[z.real <= 0]
        raise ValueError(f"digamma requires Re z > 0, got {bad.ravel()[0]}")
    acc = np.zeros_like(z)
    w = z.copy()
    for _ in range(12):
        low = w.real < 12.0
        if not np.any(low):
            break
        acc = acc - np.where(low, 1.0 / w, 0.0)
        w = np.where(low, w + 1.0, w)
    # now Re w >= 12 everywhere (at most 12 shifts were needed since Re z > 0)
    inv2 = 1.0 / (w * w)
    series = np.zeros_like(w)
    p = inv2.copy()
    for k, b in enumerate(_BERN, start=1):
        series = series + b / (2 * k) * p
        p = p * inv2
    return acc + np.log(w) - 0.5 / w - series


def digamma_real(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise ValueError("digamma has poles at non-positive integers")
    return float(digamma(x).real)


# --------------------------------------------------------------------------
# smooth bump and the Neumann-series objects


def bump(x):
    """Default weight Omega: exp(-1/((x-1/2)(5/2-x))) on (1/2, 5/2), else 0."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0.5) & (x < 2.5)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.exp(-1.0 / ((xi - 0.5) * (2.5 - xi)))
    return out


def bump_g1(K: float):
    """g_1(x) = Omega(((x + 3)/2)/K), the weight transported to r = 2k - 3."""
    return lambda x: bump((np.asarray(x, dtype=float) + 3.0) / (2.0 * K))


def g1_support(K: float) -> tuple[float, float]:
    return K - 3.0, 5.0 * K - 3.0


def neumann_sum(K: float, xi: float) -> float:
    """4 sum_{r = 1 mod 4} g_1(r) J_r(xi) for the default bump at scale K."""
    lo, hi = g1_support(K)
    r = np.arange(1, int(math.ceil(hi)) + 1, 4)
    r = r[(r > lo) & (r < hi)]
    if r.size == 0:
        return 0.0
    J = bessel_j_int_orders(int(r[-1]), np.array([xi]))[:, 0]
    g = bump_g1(K)(r.astype(float))
    return float(4.0 * np.dot(g, J[r]))


def h_transform(K: float, xi: float, panels_per_wave: int = 4) -> float:
    """h(xi) = int_0^inf g_1(sqrt(2 xi y)) sin(xi + y - pi/4) (pi y)^{-1/2} dy.

    With y = u^2 the integrand becomes 2 g_1(sqrt(2 xi) u) sin(xi + u^2 - pi/4)/sqrt(pi),
    supported where sqrt(2 xi) u lies in the support of g_1.
    """
    lo, hi = g1_support(K)
    s = math.sqrt(2.0 * xi)
    u0, u1 = max(lo, 0.0) / s, hi / s
    # local wavelength of sin(u^2) near u is pi/u
    npan = max(8, int(math.ceil(panels_per_wave * (u1 * u1 - u0 * u0) / math.pi)) + 8)
    rule = panel_rule(np.linspace(u0, u1, npan + 1), 16)
    u = rule.nodes
    vals = 2.0 * bump_g1(K)(s * u) * np.sin(xi + u * u - math.pi / 4) / math.sqrt(math.pi)
    return rule.integrate(vals)


def c3_constant(K: float, n_t: int = 4096) -> float:
    """c_3(g_1) = int |ghat_1(t) t^3| dt, ghat_1(t) = int g_1(x) e(-x t) dx."""
    lo, hi = g1_support(K)
    rule_x = panel_rule(np.linspace(lo, hi, 65), 16)
    gx = bump_g1(K)(rule_x.nodes) * rule_x.weights
    # ghat_1 decays faster than any power beyond |t| ~ (a few) / (support width)
    tmax = 40.0 / K
    rule_t = panel_rule(np.linspace(0.0, tmax, n_t // 16 + 1), 16)
    t = rule_t.nodes
    total = 0.0
    for chunk in np.array_split(np.arange(t.size), 16):
        ph = np.exp(-2j * np.pi * np.outer(t[chunk], rule_x.nodes))
        gh = ph @ gx
        total += float(np.dot(rule_t.weights[chunk], np.abs(gh) * t[chunk] ** 3))
    return 2.0 * total
