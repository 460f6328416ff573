"""Exponential sums: the symplectic Kloosterman sum K(Q, T; C), the rank-one
sums H^{+-}(P, S; c) and the character data attached to chi_{-4}."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import intlat
from .intlat import Mat2, QuadForm2


@dataclass(frozen=True)
class CharValues:
    p: int
    chi: int
    lambda_p: int
    mu_p: int


@dataclass(frozen=True)
class ExpSumValue:
    value: complex
    terms: int
    phase_denominator: int


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    r = math.isqrt(n)
    f = 3
    while f <= r:
        if n % f == 0:
            return False
        f += 2
    return True


def chi4(n: int) -> int:
    """The non-trivial character mod 4."""
    r = n % 4
    return 0 if r % 2 == 0 else (1 if r == 1 else -1)


def char_values(p: int) -> CharValues:
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    chi = chi4(p)
    return CharValues(p, chi, 1 + chi, chi)


def _sum_residues(counts: np.ndarray, den: int) -> complex:
    """sum_r counts[r] e(r / den), with the residues already reduced."""
    r = np.nonzero(counts)[0]
    if r.size == 0:
        return 0j
    ang = 2.0 * np.pi * r / den
    w = counts[r].astype(float)
    return complex(float(np.dot(w, np.cos(ang))), float(np.dot(w, np.sin(ang))))


# --------------------------------------------------------------------------
# symplectic Kloosterman sum


def kloosterman_phase_numerators(q: QuadForm2, t: QuadForm2, cm: Mat2):
    """Yield (D, N) with Tr(A C^-1 Q + C^-1 D T) = N / (2 |det C|) for every
    completable class D, in the deterministic representative order."""
    dc = intlat.det(cm)
    sgn = 1 if dc > 0 else -1
    adj = intlat.adjugate(cm)
    q2 = q.doubled()
    t2 = t.doubled()
    lat = intlat.compatible_d_lattice(cm)
    for _, dm in lat.representatives():
        comp = intlat.symplectic_complete(cm, dm)
        if comp is None:
            continue
        am, _ = comp
        num = intlat.trace(intlat.mul(intlat.mul(am, adj), q2)) + intlat.trace(intlat.mul(intlat.mul(adj, dm), t2))
        yield dm, sgn * num


def sym_kloosterman(q: QuadForm2, t: QuadForm2, cm: Mat2) -> ExpSumValue:
    """K(Q, T; C) by enumeration of D mod C Lambda and explicit symplectic completion."""
    if intlat.det(cm) == 0:
        raise ValueError(f"singular matrix {cm}")
    den = 2 * abs(intlat.det(cm))
    counts = np.zeros(den, dtype=np.int64)
    terms = 0
    for _, num in kloosterman_phase_numerators(q, t, cm):
        counts[num % den] += 1
        terms += 1
    return ExpSumValue(_sum_residues(counts, den), terms, den)


@lru_cache(maxsize=1 << 16)
def classical_kloosterman(a: int, b: int, c: int) -> float:
    """S(a, b; c) = sum over x mod c coprime to c of e((a x + b x^-1) / c); always real."""
    if c == 1:
        return 1.0
    counts = np.zeros(c, dtype=np.int64)
    for x in range(1, c):
        if math.gcd(x, c) == 1:
            counts[(a * x + b * pow(x, -1, c)) % c] += 1
    return _sum_residues(counts, c).real


def sym_kloosterman_fast(q: QuadForm2, t: QuadForm2, cm: Mat2) -> complex:
    """K(Q, T; C), reduced to a classical Kloosterman sum when the first
    elementary divisor of C is 1, and enumerated otherwise."""
    u, d1, d2, v = intlat.smith_normal_form(cm)
    if d1 != 1:
        return sym_kloosterman(q, t, cm).value
    # C = P diag(1, d2) R with P = U^-1, R = V^-1; rows of P^-1 = U, columns of R^-1 = V
    qq = q.value(u[2], u[3])
    tt = t.value(v[1], v[3])
    return complex(classical_kloosterman(qq % d2, tt % d2, d2))


# --------------------------------------------------------------------------
# rank-one sums


def h_sum(p: QuadForm2, s: QuadForm2, c: int, sign: int) -> ExpSumValue:
    """H^{sign}(P, S; c) with P = (p1, p2, p4), S = (s1, s2, s4) in (a, b, c) notation."""
    if c < 1:
        raise ValueError("modulus must be >= 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    p1, p2, p4 = p.a, p.b, p.c
    s1, s2, s4 = s.a, s.b, s.c
    if s4 != p4:
        return ExpSumValue(0j, 0, c)
    d1 = np.array([x for x in range(c) if math.gcd(x, c) == 1], dtype=np.int64)
    if c == 1:
        d1 = np.array([0], dtype=np.int64)
    d1bar = np.array([pow(int(x), -1, c) if c > 1 else 0 for x in d1], dtype=np.int64)
    d2 = np.arange(c, dtype=np.int64)
    # reduce every coefficient first so int64 never overflows
    a2 = (d1bar * (s4 % c)) % c
    a1 = (s2 - sign * d1bar * p2) % c
    a0 = (d1bar * (p1 % c) + d1 * (s1 % c)) % c
    sq = (d2 * d2) % c
    num = (a2[:, None] * sq[None, :] + a1[:, None] * d2[None, :] + a0[:, None]) % c
    counts = np.bincount(num.ravel(), minlength=c)
    inner = _sum_residues(counts, c)
    shift = cmath.exp(-2j * math.pi * sign * p2 * s2 / (2 * c * s4))
    return ExpSumValue(inner * shift, int(num.size), c)


def primitive_circle_solutions(s: int) -> list[tuple[int, int]]:
    """All primitive (x, y) with x^2 + y^2 = s."""
    if s < 1:
        raise ValueError("s must be >= 1")
    out = []
    r = math.isqrt(s)
    for x in range(-r, r + 1):
        y2 = s - x * x
        y = math.isqrt(y2)
        if y * y != y2:
            continue
        for yy in {y, -y}:
            if math.gcd(x, yy) == 1:
                out.append((x, yy))
    return sorted(out)


def complete_bottom_row(x: int, y: int) -> Mat2:
    """U in SL_2(Z) with bottom row (x, y) and minimal non-negative top-left entry."""
    g, a, b = intlat.egcd(x, y)
    assert g == 1
    # top row (p, q) with p y - q x = 1: p = b, q = -a is one solution
    p, q = b, -a
    if x != 0:
        t = -(p // x) if x > 0 else (p // -x)
        p, q = p + t * x, q + t * y
    return (p, q, x, y)


def complete_first_column(x: int, y: int) -> Mat2:
    """V in SL_2(Z) with first column (x, y)."""
    g, a, b = intlat.egcd(x, y)
    assert g == 1
    return (x, -b, y, a)


def rank1_pairs(s: int, m: int, n: int) -> list[tuple[Mat2, Mat2]]:
    """(U, V) with n |bottom row of U|^2 = m |first column of V|^2 = s.

    U runs over bottom rows modulo a global sign, V over all first columns."""
    if s % n or s % m:
        return []
    rows = [r for r in primitive_circle_solutions(s // n) if (r[0], r[1]) > (-r[0], -r[1])]
    cols = primitive_circle_solutions(s // m)
    us = [complete_bottom_row(*r) for r in rows]
    # (v11, v21) with (-v21, v11) T (-v21, v11)^T = m (v11^2 + v21^2)
    vs = [complete_first_column(*c) for c in cols]
    return [(u, v) for u in us for v in vs]


def rank1_forms(u: Mat2, v: Mat2, m: int, n: int) -> tuple[QuadForm2, QuadForm2]:
    """(P, S) = (U (nI) U^T, V^-1 (mI) V^-T)."""
    p = QuadForm2.scalar(n).congruent(u)
    vinv = intlat.inverse_unimodular(v)
    s = QuadForm2.scalar(m).congruent(vinv)
    return p, s
