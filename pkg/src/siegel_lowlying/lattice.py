"""Counting integer 2x2 matrices of fixed determinant in a Euclidean ball."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .intlat import egcd


@dataclass(frozen=True)
class LatticeCount:
    d: int
    X: float
    count: int
    main_term: float


def sigma_minus1(d: int) -> Fraction:
    """sum over positive divisors t of |d| of 1/t."""
    d = abs(d)
    if d == 0:
        raise ValueError("d must be nonzero")
    total = Fraction(0)
    for t in range(1, math.isqrt(d) + 1):
        if d % t == 0:
            total += Fraction(1, t)
            if t * t != d:
                total += Fraction(t, d)
    return total


def _count_on_line(w0: tuple[int, int], u: tuple[int, int], R: int) -> int:
    """#{t in Z : |w0 + t u|^2 <= R}, exactly."""
    a = u[0] * u[0] + u[1] * u[1]
    b = w0[0] * u[0] + w0[1] * u[1]
    c = w0[0] * w0[0] + w0[1] * w0[1] - R
    disc = b * b - a * c
    if disc < 0:
        return 0
    s = math.isqrt(disc)

    def inside(t: int) -> bool:
        return a * t * t + 2 * b * t + c <= 0

    lo = (-b - s) // a
    while not inside(lo) and lo * a < -b:
        lo += 1
    while inside(lo - 1):
        lo -= 1
    hi = (-b + s) // a + 1
    while not inside(hi) and hi * a > -b:
        hi -= 1
    while inside(hi + 1):
        hi += 1
    return max(0, hi - lo + 1) if inside(lo) else 0


def count_pd(d: int, X: float) -> int:
    """#{(a, b, c, e) in Z^4 : a e - b c = d, a^2 + b^2 + c^2 + e^2 <= X}."""
    if d == 0:
        raise ValueError("d must be nonzero")
    if X < 0:
        raise ValueError("X must be non-negative")
    Xi = int(math.floor(X))
    total = 0
    r = math.isqrt(Xi)
    for a in range(-r, r + 1):
        rb = math.isqrt(Xi - a * a)
        for b in range(-rb, rb + 1):
            if a == 0 and b == 0:
                continue
            rem = Xi - a * a - b * b
            g, x, y = egcd(a, b)
            if d % g:
                continue
            # a x + b y = g, so (e, c) = (d/g)(x, -y) solves a e - b c = d
            q = d // g
            w0 = (-q * y, q * x)  # (c, e)
            u = (a // g, b // g)  # kernel direction of (c, e) -> a e - b c
            total += _count_on_line(w0, u, rem)
    return total


def pd_main_term(d: int, X: float) -> float:
    if d < 1:
        raise ValueError("d must be >= 1")
    return 6.0 * float(sigma_minus1(d)) * X


def lattice_count(d: int, X: float) -> LatticeCount:
    return LatticeCount(d, X, count_pd(d, X), pd_main_term(abs(d), X))


def brute_count_pd(d: int, X: float) -> int:
    """Exhaustive oracle over the box |entries| <= sqrt X."""
    Xi = int(math.floor(X))
    r = math.isqrt(Xi)
    rng = range(-r, r + 1)
    return sum(1 for a in rng for b in rng for c in rng for e in rng
               if a * e - b * c == d and a * a + b * b + c * c + e * e <= Xi)
