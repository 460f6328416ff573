"""Test functions, symmetry-type densities and the explicit-formula assembly of
weighted one-level densities for spin and standard L-functions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import sici

from . import petersson, primes, satake, specfun


# --------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunctionPair:
    phi: Callable[[np.ndarray], np.ndarray]
    phi_hat: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    phi_imag_axis: Callable[[float], float] | None = None
    # phi_hat(y) = sum_i poly[i] |y|^i on the support, when it is piecewise polynomial
    phi_hat_poly: tuple[float, ...] | None = None
    # phi(x) = fejer_amp (1 - cos(fejer_freq x)) / x^2 for x != 0, when of that shape
    fejer_amp: float | None = None
    fejer_freq: float | None = None
    v: Fraction | None = None

    __test__ = False

    @property
    def phi0(self) -> float:
        return float(self.phi(np.array([0.0]))[0])

    @property
    def phi_hat0(self) -> float:
        return float(self.phi_hat(np.array([0.0]))[0])

    @property
    def phi_hat_max(self) -> float:
        ys = np.linspace(0.0, self.support_radius, 1025)
        return float(np.max(np.abs(self.phi_hat(ys))))


def fejer_pair(v: float | Fraction) -> TestFunctionPair:
    """Phi(x) = (sin(pi v x) / (pi v x))^2 with hat Phi(y) = (1 - |y|/v)/v on |y| < v."""
    vq = Fraction(v).limit_denominator(10 ** 9) if not isinstance(v, Fraction) else v
    vf = float(v)
    if not 0 < vf <= 1:
        raise ValueError(f"v must lie in (0, 1], got {v}")

    def phi(x):
        return np.sinc(vf * np.asarray(x, dtype=float)) ** 2

    def phi_hat(y):
        y = np.abs(np.asarray(y, dtype=float))
        return np.where(y < vf, (1.0 - y / vf) / vf, 0.0)

    def phi_imag_axis(u: float) -> float:
        a = math.pi * vf * u
        return 1.0 if a == 0 else (math.sinh(a) / a) ** 2

    return TestFunctionPair(phi, phi_hat, vf, phi_imag_axis, (1.0 / vf, -1.0 / vf ** 2),
                            1.0 / (2.0 * (math.pi * vf) ** 2), 2.0 * math.pi * vf, vq)


# --------------------------------------------------------------------------
# symmetry types


class SymmetryType(str, enum.Enum):
    O = "O"
    SO_EVEN = "SOeven"
    SO_ODD = "SOodd"
    SP = "Sp"
    U = "U"


# (constant, coefficient of sin(2 pi x)/(2 pi x), Dirac weight at 0) for W
_W_PARTS = {
    SymmetryType.O: (1.0, 0.0, 0.5),
    SymmetryType.SO_EVEN: (1.0, 1.0, 0.0),
    SymmetryType.SO_ODD: (1.0, -1.0, 1.0),
    SymmetryType.SP: (1.0, -1.0, 0.0),
    SymmetryType.U: (1.0, 0.0, 0.0),
}
# (Dirac weight at 0, constant, coefficient of eta) for hat W
_W_HAT_PARTS = {
    SymmetryType.O: (1.0, 0.5, 0.0),
    SymmetryType.SO_EVEN: (1.0, 0.0, 0.5),
    SymmetryType.SO_ODD: (1.0, 1.0, -0.5),
    SymmetryType.SP: (1.0, 0.0, -0.5),
    SymmetryType.U: (1.0, 0.0, 0.0),
}


def eta(y):
    y = np.abs(np.asarray(y, dtype=float))
    return np.where(y < 1, 1.0, np.where(y == 1, 0.5, 0.0))


def _sinc2pi(x):
    return np.sinc(2.0 * np.asarray(x, dtype=float))


def w_density(kind: SymmetryType, x):
    """Absolutely continuous part of W(kind); the Dirac part is w_atom(kind)."""
    c0, cs, _ = _W_PARTS[SymmetryType(kind)]
    return c0 + cs * _sinc2pi(x)


def w_atom(kind: SymmetryType) -> float:
    return _W_PARTS[SymmetryType(kind)][2]


def w_hat(kind: SymmetryType, y) -> tuple[float, np.ndarray]:
    """(weight of delta_0, density part) of hat W(kind) at y."""
    atom, c0, ce = _W_HAT_PARTS[SymmetryType(kind)]
    return atom, c0 + ce * eta(y)


# --------------------------------------------------------------------------
# integrals against Phi


@dataclass(frozen=True)
class PhiIntegral:
    value: float
    error_bound: float


def _panels(X: float, width: float) -> np.ndarray:
    n = max(1, int(math.ceil(X / width)))
    return np.linspace(0.0, X, n + 1)


def integrate_against_phi(pair: TestFunctionPair, g: Callable[[np.ndarray], np.ndarray],
                          X: float, g_bound: Callable[[float], float],
                          g_const: float | None = None) -> PhiIntegral:
    """int_R Phi(x) g(x) dx for even g.

    [0, X] is integrated by composite Gauss-Legendre.  Beyond X, Fejer-shaped Phi is
    split into its mean A/x^2 (integrated exactly when g is the constant g_const,
    otherwise by a substitution rule) and its oscillating part, which is bounded.
    Without that shape the tail is bounded by sup|Phi x^2| * int |g| / x^2.
    """
    width = 0.5 / max(pair.support_radius, 0.05)
    rule = specfun.panel_rule(_panels(X, width), 16)
    head = 2.0 * math.fsum((rule.weights * pair.phi(rule.nodes) * g(rule.nodes)).tolist())
    if pair.fejer_amp is None:
        amp = float(np.max(pair.phi(np.linspace(X, 2 * X, 4097)) * np.linspace(X, 2 * X, 4097) ** 2))
        bound = 2.0 * amp * 2.0 * g_bound(X) / X
        return PhiIntegral(head, bound)
    A, w = pair.fejer_amp, pair.fejer_freq
    if g_const is not None:
        # int_X^inf (1 - cos w x) / x^2 dx = 1/X - cos(wX)/X + w (pi/2 - Si(wX))
        si, _ = sici(w * X)
        tail = 2.0 * A * g_const * (1.0 / X - math.cos(w * X) / X + w * (math.pi / 2 - si))
        return PhiIntegral(head + tail, 0.0)
    # mean part: int_X^inf g(x)/x^2 dx = (1/X) int_0^1 g(X/u) du, u = t^2 removes the log.
    # Meant for slowly varying g; the gap between two rule sizes is reported as its error.
    means = []
    for n in (64, 128):
        r = specfun.gauss_legendre(n, 0.0, 1.0)
        means.append(math.fsum((r.weights * 2.0 * r.nodes * g(X / (r.nodes * r.nodes))).tolist()) / X)
    rule_gap = min(abs(means[1] - means[0]), g_bound(X) / X)
    # oscillating part by one integration by parts: |int g cos(wx)/x^2| <= 3 sup|g| / (w X^2)
    osc = 3.0 * g_bound(X) / (w * X * X)
    return PhiIntegral(head + 2.0 * A * means[1], 2.0 * A * (osc + rule_gap))


def plancherel_check(pair: TestFunctionPair, kind: SymmetryType, X: float = 4000.0) -> tuple[float, float]:
    """(int Phi W, int hat Phi hat W) for one symmetry type."""
    kind = SymmetryType(kind)
    c0, cs, atom_x = _W_PARTS[kind]
    const = integrate_against_phi(pair, lambda x: np.ones_like(x), X, lambda x: 1.0, g_const=1.0)
    osc = integrate_against_phi(pair, _sinc2pi, X, lambda x: 1.0 / (2 * math.pi * x))
    lhs = c0 * const.value + cs * osc.value + atom_x * pair.phi0
    atom_y, d0, de = _W_HAT_PARTS[kind]
    breaks = np.unique(np.array([0.0, pair.support_radius, min(1.0, pair.support_radius), 1.0]))
    breaks = breaks[breaks <= pair.support_radius]
    rule = specfun.panel_rule(breaks, 16)
    dens = d0 + de * eta(rule.nodes)
    rhs = atom_y * pair.phi_hat0 + 2.0 * math.fsum((rule.weights * pair.phi_hat(rule.nodes) * dens).tolist())
    return lhs, rhs


def plancherel_rhs_exact(v: Fraction, kind: SymmetryType) -> Fraction:
    """The hat side for the Fejer pair in exact arithmetic, v <= 1."""
    if not 0 < v <= 1:
        raise ValueError("v must lie in (0, 1]")
    atom_y, d0, de = _W_HAT_PARTS[SymmetryType(kind)]
    # int hat Phi = 1 and the support lies inside [-1, 1]
    return Fraction(atom_y) / v + Fraction(d0) + Fraction(de)


# --------------------------------------------------------------------------
# gamma-factor terms


def _digamma_bound(x: float, shift: float) -> float:
    """Crude bound for |Re psi(a + i t)| at t ~ x, a >= 1/4."""
    return abs(math.log(shift + x + 1.0)) + 2.0 / 0.25 + 3.0


def _gamma_integral(pair: TestFunctionPair, L: float, g: Callable[[np.ndarray], np.ndarray],
                    g_bound: Callable[[float], float], X: float) -> PhiIntegral:
    res = integrate_against_phi(pair, g, X, g_bound)
    return PhiIntegral(2.0 / L * res.value, 2.0 / L * res.error_bound)


def _spin_gamma_integrand(k: float, L: float):
    def g(x):
        t = 2 * math.pi * np.asarray(x, dtype=float) / L
        return (-2 * math.log(2 * math.pi) + specfun.digamma(1 + 1j * t).real
                + specfun.digamma(k - 1 + 1j * t).real)
    return g


def _std_gamma_integrand(k: float, L: float):
    # Gamma_R(s) Gamma_C(s + k - 1) Gamma_C(s + k - 2) at s = 1/2 + i t
    def g(x):
        t = 2 * math.pi * np.asarray(x, dtype=float) / L
        return (-0.5 * math.log(math.pi) + 0.5 * specfun.digamma(0.25 + 0.5j * t).real
                - 2 * math.log(2 * math.pi) + specfun.digamma(k - 0.5 + 1j * t).real
                + specfun.digamma(k - 1.5 + 1j * t).real)
    return g


def gamma_term_spin(k: float, pair: TestFunctionPair, X: float = 2000.0) -> PhiIntegral:
    if k < 10:
        raise ValueError("k must be >= 10")
    L = math.log(k * k)
    bound = lambda x: 2 * math.log(2 * math.pi) + 2 * _digamma_bound(2 * math.pi * x / L, k)
    return _gamma_integral(pair, L, _spin_gamma_integrand(k, L), bound, X)


def gamma_term_std(k: float, pair: TestFunctionPair, X: float = 2000.0) -> PhiIntegral:
    if k < 10:
        raise ValueError("k must be >= 10")
    L = 4.0 * math.log(k)
    bound = lambda x: 2.6 * math.log(2 * math.pi) + 3 * _digamma_bound(2 * math.pi * x / L, k)
    return _gamma_integral(pair, L, _std_gamma_integrand(k, L), bound, X)


def gamma_term_std_avg(K: float, pair: TestFunctionPair, X: float = 2000.0) -> PhiIntegral:
    """Omega(k/K)-average of the standard gamma term at the fixed conductor K^4."""
    if K < 12:
        raise ValueError("K must be >= 12")
    ks, ws = petersson.weight_grid(K)
    wsum = math.fsum(ws)
    L = 4.0 * math.log(K)
    parts = [_std_gamma_integrand(k, L) for k in ks]

    def g(x):
        return sum(w * f(x) for w, f in zip(ws, parts)) / wsum

    bound = lambda x: 2.6 * math.log(2 * math.pi) + 3 * _digamma_bound(2 * math.pi * x / L, 2.5 * K)
    return _gamma_integral(pair, L, g, bound, X)


# --------------------------------------------------------------------------
# Delta tables


DeltaKey = tuple[int, int]


class DeltaSource:
    """Delta(mI, nI) values for one weight k (or one averaging scale K)."""

    def __init__(self, k: float, tol: float, diagonal: bool = False, averaged: bool = False,
                 budget: float = 3e7):
        self.k = k
        self.tol = tol
        self.diagonal = diagonal
        self.averaged = averaged
        self.budget = budget
        self._cache: dict[DeltaKey, tuple[float, float]] = {}

    def get(self, m: int, n: int) -> tuple[float, float]:
        """(value, truncation bound) of Delta(mI, nI)."""
        key = (m, n)
        if self.diagonal:
            return (1.0 if m == n else 0.0), 0.0
        if key not in self._cache:
            if self.averaged:
                rep = petersson.averaged_delta(m, n, self.k, self.tol, self.budget)
                self._cache[key] = (rep.value, rep.tail_bound)
            else:
                d = petersson.delta_k(m, n, int(self.k), self.tol, budget=self.budget)
                self._cache[key] = (d.total, d.tail_bound)
        return self._cache[key]


def assemble_bracket(expr: satake.UExpression, p: int, source: DeltaSource) -> tuple[float, float]:
    """sum over monomials U_a U_b of coefficient * Delta(p^a I, p^b I), with its error bound."""
    vals: list[float] = []
    errs: list[float] = []
    for (a, b), c in sorted(expr.items()):
        coef = satake.half_powers_value(c, p)
        d, e = source.get(p ** a, p ** b)
        vals.append(coef * d)
        errs.append(abs(coef) * e)
    return math.fsum(vals), math.fsum(errs)


def diagonal_bracket(expr: satake.UExpression, p: int) -> float:
    return satake.half_powers_value(satake.diagonal_substitution(expr), p)


# --------------------------------------------------------------------------
# density reports


@dataclass(frozen=True)
class DensityReport:
    k: float
    gamma_term: float
    m1_sum: float
    m2_sum: float
    omitted_tail_budget: float
    omitted_pole_budget: float
    total: float
    target: float
    delta_tail_total: float
    gamma_error: float = 0.0
    m1_primes: int = 0
    m2_primes: int = 0
    diagonal_mode: bool = False
    notes: dict = field(default_factory=dict)


def _prime_cutoff(L: float, alpha: float, m: int) -> float:
    """Largest p with hat Phi(m log p / L) possibly nonzero: p < exp(alpha L / m)."""
    return math.exp(alpha * L / m)


def _primes_below(x: float) -> list[int]:
    n = int(math.floor(x))
    if n < 2:
        return []
    ps = primes.prime_sieve(n).tolist()
    # hat Phi vanishes at the support edge itself
    return [p for p in ps if p < x]


def _m_sum(pair: TestFunctionPair, L: float, m: int, weight_pow: float,
           brackets: Callable[[int], tuple[float, float]]) -> tuple[float, float, int]:
    """-(2/L) sum_p bracket(p) (log p / p^{weight_pow}) hat Phi(m log p / L)."""
    ps = _primes_below(_prime_cutoff(L, pair.support_radius, m))
    terms: list[float] = []
    errs: list[float] = []
    for p in ps:
        lp = math.log(p)
        w = lp / p ** weight_pow * float(pair.phi_hat(np.array([m * lp / L]))[0])
        val, err = brackets(p)
        terms.append(val * w)
        errs.append(abs(w) * err)
    return -2.0 / L * math.fsum(terms), 2.0 / L * math.fsum(errs), len(ps)


def diagonal_m1_sum_spin(k: float, pair: TestFunctionPair) -> float:
    """-(2 / log k^2) sum_p lambda_p (log p / p) hat Phi(log p / log k^2), all primes in the support.

    Uses moments of log p over primes, so hat Phi must be polynomial in |y| on its support."""
    L = math.log(k * k)
    return -2.0 / L * _poly_prime_sum(pair, L, 1, lambda tw: (1.0, 1.0))


def diagonal_m2_sum_spin(k: float, pair: TestFunctionPair) -> float:
    """m = 2 sum with Delta replaced by its diagonal values, exact 1/p coefficient included."""
    L = math.log(k * k)
    val, _, _ = _m_sum(pair, L, 2, 1.0, lambda p: (diagonal_bracket(_spin_m2_expr(p), p), 0.0))
    return val


def _poly_prime_sum(pair: TestFunctionPair, L: float, m: int, mix) -> float:
    """sum_{p < e^{alpha L/m}} (a + b chi(p)) (log p / p) hat Phi(m log p / L) via prime moments."""
    if pair.phi_hat_poly is None:
        raise ValueError("prime-moment evaluation needs a piecewise polynomial hat Phi")
    x = _prime_cutoff(L, pair.support_radius, m)
    J = len(pair.phi_hat_poly)
    a, b = mix(None)
    # hat Phi(m log p / L) = sum_i poly_i (m/L)^i (log p)^i; weight log p / p raises j by one
    plain = primes.log_moments(np.nextafter(x, 0), J, False)
    twist = primes.log_moments(np.nextafter(x, 0), J, True)
    out = []
    for i, ci in enumerate(pair.phi_hat_poly):
        s = (m / L) ** i * ci
        out.append(s * (a * plain[i + 1] + b * twist[i + 1]))
    return math.fsum(out)


def _prime_count_estimate(x: float) -> int:
    """Number of primes below x: exact up to the sieve limit, x / (log x - 1) beyond it."""
    if x <= primes.DIRECT_LIMIT:
        return len(_primes_below(x))
    return int(x / (math.log(x) - 1.0))


def _spin_m1_expr(p: int) -> satake.UExpression:
    return satake.u_expressions(p)["c1"]


def _spin_m2_expr(p: int) -> satake.UExpression:
    return satake.u_expressions(p)["c2"]


def _std_m1_expr(p: int) -> satake.UExpression:
    return satake.u_expressions(p)["tau2"]


def _std_m2_expr(p: int) -> satake.UExpression:
    return satake.u_expressions(p)["tau4"]


def _tail_budget(L: float, pair: TestFunctionPair, bound: float) -> float:
    """(2/L) sum_{m >= 3} sum_{p^m < e^{alpha L}} bound log p p^{-m/2} max|hat Phi|."""
    total = []
    x = math.exp(pair.support_radius * L)
    m = 3
    while 2 ** m < x:
        for p in _primes_below(x ** (1.0 / m)):
            total.append(bound * math.log(p) * p ** (-m / 2))
        m += 1
    return 2.0 / L * pair.phi_hat_max * math.fsum(total)


def _pole_budget(k: float, L: float, pair: TestFunctionPair) -> float:
    """2 Phi(L / (2 pi i)) times the lifted-form weight bound (unit constant, dim ~ k, weight ~ k^-3)."""
    if pair.phi_imag_axis is None:
        return math.inf
    return 2.0 * pair.phi_imag_axis(L / (2 * math.pi)) * k ** -2.0


def weighted_density_spin(k: int, pair: TestFunctionPair, tol: float = 1e-6,
                          diagonal: bool = False, budget: float = 3e7) -> DensityReport:
    """Weighted one-level density for spin L-functions of weight k from Delta-values."""
    if pair.support_radius >= 1:
        raise ValueError(f"support radius {pair.support_radius} outside (-1, 1)")
    if k < 10 or k % 2:
        raise ValueError("k must be even and >= 10")
    L = math.log(k * k)
    src = DeltaSource(k, tol, diagonal, budget=budget)
    gam = gamma_term_spin(k, pair)
    if diagonal and pair.phi_hat_poly is not None:
        # the diagonal m = 1 bracket is lambda_p / sqrt p; sum it through prime moments
        m1, e1 = diagonal_m1_sum_spin(k, pair), 0.0
        n1 = _prime_count_estimate(_prime_cutoff(L, pair.support_radius, 1))
    else:
        m1, e1, n1 = _m_sum(pair, L, 1, 0.5, lambda p: assemble_bracket(_spin_m1_expr(p), p, src))
    m2, e2, n2 = _m_sum(pair, L, 2, 1.0, lambda p: assemble_bracket(_spin_m2_expr(p), p, src))
    total = gam.value + m1 + m2
    return DensityReport(k, gam.value, m1, m2, _tail_budget(L, pair, 4.0), _pole_budget(k, L, pair),
                         total, pair.phi_hat0 - pair.phi0 / 2, e1 + e2, gam.error_bound, n1, n2, diagonal)


def weighted_density_std(k: int, pair: TestFunctionPair, tol: float = 1e-6,
                         diagonal: bool = False, budget: float = 3e7) -> DensityReport:
    """Weighted one-level density for standard L-functions of weight k."""
    if pair.support_radius >= 0.25:
        raise ValueError(f"support radius {pair.support_radius} outside (-1/4, 1/4)")
    if k < 10 or k % 2:
        raise ValueError("k must be even and >= 10")
    L = 4.0 * math.log(k)
    src = DeltaSource(k, tol, diagonal, budget=budget)
    gam = gamma_term_std(k, pair)
    m1, e1, n1 = _m_sum(pair, L, 1, 0.5, lambda p: assemble_bracket(_std_m1_expr(p), p, src))
    m2, e2, n2 = _m_sum(pair, L, 2, 1.0, lambda p: assemble_bracket(_std_m2_expr(p), p, src))
    total = gam.value + m1 + m2
    return DensityReport(k, gam.value, m1, m2, _tail_budget(L, pair, 5.0), 0.0,
                         total, pair.phi_hat0 - pair.phi0 / 2, e1 + e2, gam.error_bound, n1, n2, diagonal)


def averaged_budget_exponents(alpha: float, eps: float = 0.1, j: int | None = None) -> tuple[int, tuple[float, float, float]]:
    """(j, exponents of K) for K^{6a-4} + K^{18a-5+6eps} + K^{(4j+10)a-(2j+3)}; j minimal >= 3."""
    if j is None:
        j = 3
        while (4 * j + 10) * alpha - (2 * j + 3) >= 0 and j < 1000:
            j += 1
    return j, (6 * alpha - 4, 18 * alpha - 5 + 6 * eps, (4 * j + 10) * alpha - (2 * j + 3))


def averaged_density_std(K: float, pair: TestFunctionPair, tol: float = 1e-6,
                         diagonal: bool = False, eps: float = 0.1, budget: float = 3e7) -> DensityReport:
    """Omega(k/K)-averaged density for standard L-functions, conductor K^4."""
    if pair.support_radius >= 5 / 18:
        raise ValueError(f"support radius {pair.support_radius} outside (-5/18, 5/18)")
    if K < 12:
        raise ValueError("K must be >= 12")
    L = 4.0 * math.log(K)
    src = DeltaSource(K, tol, diagonal, averaged=True, budget=budget)
    gam = gamma_term_std_avg(K, pair)
    m1, e1, n1 = _m_sum(pair, L, 1, 0.5, lambda p: assemble_bracket(_std_m1_expr(p), p, src))
    m2, e2, n2 = _m_sum(pair, L, 2, 1.0, lambda p: assemble_bracket(_std_m2_expr(p), p, src))
    j, expo = averaged_budget_exponents(pair.support_radius, eps)
    curve = math.fsum(K ** e for e in expo)
    total = gam.value + m1 + m2
    return DensityReport(K, gam.value, m1, m2, _tail_budget(L, pair, 5.0), 0.0, total,
                         pair.phi_hat0 - pair.phi0 / 2, e1 + e2, gam.error_bound, n1, n2, diagonal,
                         {"budget_j": j, "budget_exponents": list(expo), "budget_curve": curve})


# --------------------------------------------------------------------------
# non-vanishing


def nonvanishing_bound(v: Fraction | int) -> Fraction:
    """5/4 - 1/(2v): the proportion bound obtained from the Fejer pair with support v."""
    v = Fraction(v)
    if not 0 < v < 1:
        raise ValueError("v must lie in (0, 1)")
    return Fraction(5, 4) - 1 / (2 * v)


def nonvanishing_limit() -> Fraction:
    """Limit of the bound as v -> 1 from below; the expression is continuous at v = 1."""
    return Fraction(5, 4) - Fraction(1, 2)


def nonvanishing_root() -> Fraction:
    """The v at which the bound vanishes: 5/4 = 1/(2v)."""
    return Fraction(1) / (2 * Fraction(5, 4))
