"""Local spin Satake parameters (alpha, beta) at a prime, their power sums, the
scalar-matrix coefficient ratios U_m, and the local Euler factors."""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .expsums import char_values, is_prime


@dataclass(frozen=True)
class LocalParams:
    p: int
    alpha: complex
    beta: complex

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.alpha == 0 or self.beta == 0:
            raise ValueError("Satake parameters must be nonzero")

    def inverted(self) -> "LocalParams":
        return LocalParams(self.p, 1 / self.alpha, 1 / self.beta)


@dataclass(frozen=True)
class PowerSums:
    c: list[complex]
    tau: list[complex]
    u: list[complex]


def tempered(p: int, rng: random.Random) -> LocalParams:
    """Random parameters on the unit circle."""
    a = cmath.exp(2j * math.pi * rng.random())
    b = cmath.exp(2j * math.pi * rng.random())
    return LocalParams(p, a, b)


def saito_kurokawa(p: int, rng: random.Random) -> LocalParams:
    """alpha = sqrt(p) and beta on the unit circle, the shape of a lifted form."""
    return LocalParams(p, complex(math.sqrt(p)), cmath.exp(2j * math.pi * rng.random()))


def spin_roots(params: LocalParams) -> list[complex]:
    a, b = params.alpha, params.beta
    return [a, 1 / a, b, 1 / b]


def std_roots(params: LocalParams) -> list[complex]:
    a, b = params.alpha, params.beta
    return [1 + 0j, a * b, a / b, b / a, 1 / (a * b)]


def power_sums(params: LocalParams, M: int) -> PowerSums:
    """c_m and tau_{2m} for m = 1..M, with U_1..U_M from u_series."""
    if M < 1:
        raise ValueError("M must be >= 1")
    c = [sum(r ** m for r in spin_roots(params)) for m in range(1, M + 1)]
    tau = [sum(r ** m for r in std_roots(params)) for m in range(1, M + 1)]
    return PowerSums(c, tau, u_series(params, M))


def _poly_mul(x: list[complex], y: list[complex], M: int) -> list[complex]:
    out = [0j] * (M + 1)
    for i, xi in enumerate(x[: M + 1]):
        if xi == 0:
            continue
        for j, yj in enumerate(y[: M + 1 - i]):
            out[i + j] += xi * yj
    return out


def _series_divide(num: list[complex], den: list[complex], M: int) -> list[complex]:
    """Power-series quotient num / den modulo x^{M+1}; den[0] must be 1."""
    num = num + [0j] * (M + 1 - len(num))
    den = den + [0j] * (M + 1 - len(den))
    q = [0j] * (M + 1)
    for a in range(M + 1):
        q[a] = num[a] - sum(den[j] * q[a - j] for j in range(1, a + 1))
    return q


def u_series(params: LocalParams, M: int) -> list[complex]:
    """U_1..U_M: coefficients of (1 - x/sqrt p)(1 - chi(p) x/sqrt p) / prod(1 - r x)."""
    ch = char_values(params.p)
    sp = math.sqrt(params.p)
    num = _poly_mul([1, -1 / sp], [1, -ch.chi / sp], M)
    den = [1 + 0j]
    for r in spin_roots(params):
        den = _poly_mul(den, [1, -r], M)
    return _series_divide(num, den, M)[1:]


# An expression in the U_m is stored as {(a, b): coefficient of U_a U_b} with U_0 = 1,
# and each coefficient as {e: q} meaning sum_e q p^{-e/2} with rational q.
HalfPowers = dict[int, Fraction]
UExpression = dict[tuple[int, int], HalfPowers]


def _hp(**terms: int) -> HalfPowers:
    return {int(k[1:]): Fraction(v) for k, v in terms.items() if v != 0}


def u_expressions(p: int) -> dict[str, UExpression]:
    """c_1, c_2, tau_2, tau_4 as polynomials of degree two in the U_m."""
    ch = char_values(p)
    lp, mp = ch.lambda_p, ch.mu_p
    return {
        "c1": {(1, 0): _hp(e0=1), (0, 0): _hp(e1=lp)},
        "c2": {(1, 1): _hp(e0=-1), (2, 0): _hp(e0=2), (0, 0): _hp(e2=lp * lp - 2 * mp)},
        "tau2": {(1, 1): _hp(e0=1), (2, 0): _hp(e0=-1), (1, 0): _hp(e1=lp),
                 (0, 0): _hp(e0=-1, e2=mp)},
        "tau4": {(3, 1): _hp(e0=-1), (2, 2): _hp(e0=1), (2, 1): _hp(e1=lp),
                 (1, 1): _hp(e0=-1, e2=mp), (3, 0): _hp(e1=-lp),
                 (2, 0): _hp(e2=lp * lp - 2 * mp), (1, 0): _hp(e1=-2 * lp, e3=lp * mp),
                 (0, 0): _hp(e0=1, e2=-lp * lp, e4=mp * mp)},
    }


def half_powers_value(c: HalfPowers, p: int) -> float:
    return math.fsum(float(q) * p ** (-e / 2) for e, q in c.items())


def evaluate_expression(expr: UExpression, p: int, u: list[complex]) -> complex:
    uu = [1 + 0j] + list(u)
    return sum(half_powers_value(c, p) * uu[a] * uu[b] for (a, b), c in expr.items())


def diagonal_substitution(expr: UExpression) -> HalfPowers:
    """Replace every U_a U_b by delta_{a = b} and collect the exact coefficient."""
    out: HalfPowers = {}
    for (a, b), c in expr.items():
        if a != b:
            continue
        for e, q in c.items():
            out[e] = out.get(e, Fraction(0)) + q
    return {e: q for e, q in out.items() if q != 0}


def char_coefficients(p: int) -> tuple[float, float]:
    """(lambda_p / sqrt p, mu_p / p)."""
    ch = char_values(p)
    return ch.lambda_p / math.sqrt(p), ch.mu_p / p


def c1_from_u(p: int, u: list[complex]) -> complex:
    return evaluate_expression(u_expressions(p)["c1"], p, u)


def c2_from_u(p: int, u: list[complex]) -> complex:
    return evaluate_expression(u_expressions(p)["c2"], p, u)


def tau2_from_u(p: int, u: list[complex]) -> complex:
    return evaluate_expression(u_expressions(p)["tau2"], p, u)


def tau4_from_u(p: int, u: list[complex]) -> complex:
    """The degree-two expression for tau_4 in U_1, U_2, U_3."""
    return evaluate_expression(u_expressions(p)["tau4"], p, u)


def verify_u_identities(params: LocalParams) -> tuple[float, float, float, float]:
    """|c_1|, |c_2|, |tau_2|, |tau_4| residuals of the U-expressions against the power sums."""
    ps = power_sums(params, 4)
    p = params.p
    u = ps.u
    return (abs(c1_from_u(p, u) - ps.c[0]), abs(c2_from_u(p, u) - ps.c[1]),
            abs(tau2_from_u(p, u) - ps.tau[0]), abs(tau4_from_u(p, u) - ps.tau[1]))


# the documented public name for the identity check
verify_lemma21 = verify_u_identities


def coefficient_relations(params: LocalParams) -> tuple[float, float, float, float]:
    """Residuals of the four relations obtained by comparing coefficients of x^a, a = 1..4."""
    ps = power_sums(params, 4)
    lam, mu = char_coefficients(params.p)
    c1, t2 = ps.c[0], ps.tau[0]
    u1, u2, u3, u4 = ps.u
    return (abs(u1 - c1 + lam), abs(u2 - u1 * c1 + t2 + 1 - mu),
            abs(u3 - u2 * c1 + u1 * (t2 + 1) - c1),
            abs(u4 - u3 * c1 + u2 * (t2 + 1) - u1 * c1 + 1))


def elementary_relations_check(params: LocalParams) -> tuple[float, float]:
    ps = power_sums(params, 2)
    c1, c2 = ps.c
    t2, t4 = ps.tau
    return abs(c1 ** 2 - c2 - 2 * (t2 + 1)), abs((t2 + 1) ** 2 - 3 - t4 - 4 * t2 - 2 * c2)


def _roots(params: LocalParams, which: str) -> list[complex]:
    if which == "spin":
        return spin_roots(params)
    if which == "std":
        return std_roots(params)
    raise ValueError(f"unknown L-function {which!r}")


def local_euler(params: LocalParams, s: complex, which: str = "spin") -> complex:
    """prod over the local roots r of (1 - r p^-s)^-1."""
    x = params.p ** (-s)
    val = 1 + 0j
    for r in _roots(params, which):
        f = 1 - r * x
        if abs(f) < 1e-300:
            raise ZeroDivisionError(f"local factor has a pole at s = {s}")
        val /= f
    return val


def local_log_derivative(params: LocalParams, s: complex, which: str = "spin") -> complex:
    """-d/ds log L_p(s) in closed form."""
    x = params.p ** (-s)
    lp = math.log(params.p)
    return sum(r * x * lp / (1 - r * x) for r in _roots(params, which))


def log_derivative_series(params: LocalParams, s: complex, which: str = "spin", M: int = 60) -> complex:
    """sum_{m <= M} (power sum)_m log p p^{-ms}."""
    ps = power_sums(params, M)
    sums = ps.c if which == "spin" else ps.tau if which == "std" else None
    if sums is None:
        raise ValueError(f"unknown L-function {which!r}")
    lp = math.log(params.p)
    return sum(v * lp * params.p ** (-(m + 1) * s) for m, v in enumerate(sums))
