"""Exact 2x2 integer matrix algebra.

Matrices are plain row-major 4-tuples ``(a, b, c, d)`` meaning [[a, b], [c, d]].
Binary quadratic forms are :class:`QuadForm2`, the half-integral matrix
[[a, b/2], [b/2, c]], i.e. the form a x^2 + b x y + c y^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

Mat2 = tuple[int, int, int, int]

IDENTITY: Mat2 = (1, 0, 0, 1)
ZERO: Mat2 = (0, 0, 0, 0)


# --------------------------------------------------------------------------
# elementary helpers


def mul(x: Mat2, y: Mat2) -> Mat2:
    a, b, c, d = x
    e, f, g, h = y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def add(x: Mat2, y: Mat2) -> Mat2:
    return (x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3])


def sub(x: Mat2, y: Mat2) -> Mat2:
    return (x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3])


def scale(k: int, x: Mat2) -> Mat2:
    return (k * x[0], k * x[1], k * x[2], k * x[3])


def transpose(x: Mat2) -> Mat2:
    return (x[0], x[2], x[1], x[3])


def det(x: Mat2) -> int:
    return x[0] * x[3] - x[1] * x[2]


def adjugate(x: Mat2) -> Mat2:
    return (x[3], -x[1], -x[2], x[0])


def inverse_unimodular(x: Mat2) -> Mat2:
    dx = det(x)
    if dx not in (1, -1):
        raise ValueError(f"matrix {x} is not unimodular")
    return scale(dx, adjugate(x))


def is_symmetric(x: Mat2) -> bool:
    return x[1] == x[2]


def trace(x) -> int | Fraction:
    return x[0] + x[3]


def frobenius_sq(x: Mat2) -> int:
    return x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with a x + b y = g = gcd(a, b) >= 0; (|a|, sign a, 0) when a | b."""
    if a != 0 and b % a == 0:
        return abs(a), (1 if a > 0 else -1), 0
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


# --------------------------------------------------------------------------
# quadratic forms


@dataclass(frozen=True, order=True)
class QuadForm2:
    """Positive definite half-integral T = [[a, b/2], [b/2, c]]."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.a < 1 or self.c < 1 or 4 * self.a * self.c - self.b * self.b <= 0:
            raise ValueError(f"form {(self.a, self.b, self.c)} is not positive definite")

    @classmethod
    def scalar(cls, m: int) -> "QuadForm2":
        return cls(m, 0, m)

    @property
    def disc(self) -> int:
        """4 det T = 4ac - b^2."""
        return 4 * self.a * self.c - self.b * self.b

    @property
    def det(self) -> Fraction:
        return Fraction(self.disc, 4)

    def doubled(self) -> Mat2:
        """2T, an integral symmetric matrix."""
        return (2 * self.a, self.b, self.b, 2 * self.c)

    def value(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y

    def transform(self, u: Mat2) -> "QuadForm2":
        """U^T T U."""
        p, q, r, s = u
        return QuadForm2(self.value(p, r), 2 * self.a * p * q + self.b * (p * s + q * r) + 2 * self.c * r * s,
                         self.value(q, s))

    def congruent(self, u: Mat2) -> "QuadForm2":
        """U T U^T."""
        return self.transform(transpose(u))

    def eigenvalues(self) -> tuple[float, float]:
        tr = self.a + self.c
        disc = math.sqrt((self.a - self.c) ** 2 + self.b * self.b)
        return 0.5 * (tr - disc), 0.5 * (tr + disc)


def reduce_form(t: QuadForm2) -> tuple[QuadForm2, Mat2]:
    """GL_2(Z)-reduced form (0 <= b <= a <= c) and U with U^T T U = reduced."""
    a, b, c = t.a, t.b, t.c
    u: Mat2 = IDENTITY
    while True:
        # translate: x -> x + k y brings |b| <= a
        k = -((b + a) // (2 * a))
        if k:
            step = (1, k, 0, 1)
            b, c = b + 2 * a * k, a * k * k + b * k + c
            u = mul(u, step)
        if a > c:
            a, c = c, a
            b = -b
            u = mul(u, (0, -1, 1, 0))
            continue
        break
    if b < 0:
        b = -b
        u = mul(u, (1, 0, 0, -1))
    red = QuadForm2(a, b, c)
    assert t.transform(u) == red
    return red, u


def is_equivalent(t: QuadForm2, q: QuadForm2) -> bool:
    """True iff U^T T U = Q for some U in GL_2(Z)."""
    if t.disc != q.disc:
        return False
    return reduce_form(t)[0] == reduce_form(q)[0]


def aut_group(t: QuadForm2) -> list[Mat2]:
    """All U in GL_2(Z) with U^T T U = T, by exhaustive search in a proven box."""
    lam_min = t.eigenvalues()[0]
    bound = math.ceil(math.sqrt(max(t.a, t.c) / lam_min)) + 1
    # columns u of U satisfy u^T T u in {a, c}; any entry is then <= bound
    rng = range(-bound, bound + 1)
    col1 = [(x, y) for x, y in product(rng, rng) if t.value(x, y) == t.a]
    col2 = [(x, y) for x, y in product(rng, rng) if t.value(x, y) == t.c]
    out = []
    for (p, r) in col1:
        for (q, s) in col2:
            u = (p, q, r, s)
            if abs(det(u)) == 1 and t.transform(u) == t:
                out.append(u)
    return sorted(out)


# --------------------------------------------------------------------------
# Smith normal form


def smith_normal_form(cm: Mat2) -> tuple[Mat2, int, int, Mat2]:
    """(U, d1, d2, V) with U C V = diag(d1, d2), U, V in GL_2(Z), 1 <= d1 | d2."""
    if det(cm) == 0:
        raise ValueError(f"singular matrix {cm}")
    a, b, c, d = cm
    u: Mat2 = IDENTITY
    v: Mat2 = IDENTITY
    m = [a, b, c, d]

    def rowop(m, u, op):
        return list(mul(op, tuple(m))), mul(op, u)

    def colop(m, v, op):
        return list(mul(tuple(m), op)), mul(v, op)

    while True:
        # clear the first column with a row gcd step
        if m[2] != 0:
            g, x, y = egcd(m[0], m[2])
            op = (x, y, -m[2] // g, m[0] // g)
            m, u = rowop(m, u, op)
        # clear the first row with a column gcd step
        if m[1] != 0:
            g, x, y = egcd(m[0], m[1])
            op = (x, -m[1] // g, y, m[0] // g)
            m, v = colop(m, v, op)
            continue
        if m[3] % m[0] != 0:
            m, u = rowop(m, u, (1, 1, 0, 1))
            continue
        break
    if m[0] < 0:
        m, u = rowop(m, u, (-1, 0, 0, 1))
    if m[3] < 0:
        m, u = rowop(m, u, (1, 0, 0, -1))
    d1, d2 = m[0], m[3]
    assert mul(mul(u, cm), v) == (d1, 0, 0, d2)
    return u, d1, d2, v


# --------------------------------------------------------------------------
# symplectic pairs


def minors_gcd(cm: Mat2, dm: Mat2) -> int:
    """gcd of the 2x2 minors of the 2x4 block (C D)."""
    cols = [(cm[0], cm[2]), (cm[1], cm[3]), (dm[0], dm[2]), (dm[1], dm[3])]
    g = 0
    for i in range(4):
        for j in range(i + 1, 4):
            g = math.gcd(g, cols[i][0] * cols[j][1] - cols[i][1] * cols[j][0])
    return g


def is_symmetric_pair(cm: Mat2, dm: Mat2) -> bool:
    return is_symmetric(mul(cm, transpose(dm)))


def is_symplectic(a: Mat2, b: Mat2, c: Mat2, d: Mat2) -> bool:
    """M^T J M = J for M = [[A, B], [C, D]]."""
    return (is_symmetric(mul(transpose(a), c)) and is_symmetric(mul(transpose(b), d))
            and sub(mul(transpose(a), d), mul(transpose(c), b)) == IDENTITY)


def _column_hermite(rows: list[list[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """Column operations on a 2x4 integer matrix: returns (H, W) with rows W = [H | 0]."""
    m = [r[:] for r in rows]
    w = [[int(i == j) for j in range(4)] for i in range(4)]

    def combine(i, j, x, y, p, q):
        # columns (i, j) <- (x*ci + y*cj, p*ci + q*cj), determinant x q - y p = +-1
        for mat in (m, w):
            for r in mat:
                ci, cj = r[i], r[j]
                r[i], r[j] = x * ci + y * cj, p * ci + q * cj

    for row, start in ((0, 0), (1, 1)):
        for j in range(start + 1, 4):
            a, b = m[row][start], m[row][j]
            if b == 0:
                continue
            g, x, y = egcd(a, b)
            combine(start, j, x, y, -b // g, a // g)
    return m, w


def symplectic_complete(cm: Mat2, dm: Mat2) -> tuple[Mat2, Mat2] | None:
    """(A, B) with [[A, B], [C, D]] in Sp_4(Z), or None if (C, D) is not a
    coprime symmetric pair."""
    if not is_symmetric_pair(cm, dm) or minors_gcd(cm, dm) != 1:
        return None
    # rows r of (A0 B0) solve r G = e_i for G = [D^T; -C^T]; work with G^T = (D, -C)
    gt = [[dm[0], dm[1], -cm[0], -cm[1]], [dm[2], dm[3], -cm[2], -cm[3]]]
    h, w = _column_hermite(gt)
    h11, h21, h22 = h[0][0], h[1][0], h[1][1]
    assert abs(h11) == 1 and abs(h22) == 1 and h[0][1] == 0
    # H^{-1} for lower triangular unimodular H
    hinv = [[h11, 0], [-h21 * h11 * h22, h22]]
    # R^T = W[:, :2] H^{-1}
    rt = [[sum(w[i][k] * hinv[k][j] for k in range(2)) for j in range(2)] for i in range(4)]
    a0 = (rt[0][0], rt[1][0], rt[0][1], rt[1][1])
    b0 = (rt[2][0], rt[3][0], rt[2][1], rt[3][1])
    y = mul(a0, transpose(b0))
    s: Mat2 = (0, y[1] - y[2], 0, 0)
    a = add(a0, mul(s, cm))
    b = add(b0, mul(s, dm))
    assert is_symplectic(a, b, cm, dm)
    return a, b


# --------------------------------------------------------------------------
# the D-lattice


@dataclass(frozen=True)
class SymLatticeBasis:
    """Rank-3 lattice of 2x2 integer matrices given by three generators."""

    generators: tuple[Mat2, Mat2, Mat2]

    def index_in(self, other: "SymLatticeBasis") -> int:
        """|det| of the change of basis expressing self in terms of other."""
        return abs(_det3(_coords(self.generators, other.generators)))


def _det3(m) -> Fraction:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _coords(vectors, basis) -> list[list[Fraction]]:
    """Coordinates of each vector in the (rank-3) span of basis, exactly."""
    # pick three entry positions where the basis is independent
    for pos in ((0, 1, 3), (0, 2, 3), (0, 1, 2), (1, 2, 3)):
        bm = [[Fraction(b[p]) for b in basis] for p in pos]
        dd = _det3(bm)
        if dd != 0:
            break
    else:
        raise ValueError("basis is degenerate")
    out = []
    for vec in vectors:
        rhs = [Fraction(vec[p]) for p in pos]
        sol = []
        for col in range(3):
            mm = [row[:] for row in bm]
            for r in range(3):
                mm[r][col] = rhs[r]
            sol.append(_det3(mm) / dd)
        recon = [sum(sol[j] * basis[j][i] for j in range(3)) for i in range(4)]
        if recon != list(vec):
            raise ValueError(f"{vec} is not in the span")
        out.append(sol)
    return out


@dataclass(frozen=True)
class DLattice:
    """L_C = {D : C D^T symmetric} together with C*Lambda and coset representatives."""

    c: Mat2
    d1: int
    d2: int
    left: Mat2   # P with C = P diag(d1, d2) R
    right: Mat2  # R
    lattice: SymLatticeBasis
    sublattice: SymLatticeBasis

    @property
    def index(self) -> int:
        return self.d1 * self.d1 * self.d2

    def smith_to_d(self, x: int, t: int, y: int) -> Mat2:
        e = self.d2 // self.d1
        d0 = (x, t, e * t, y)
        return mul(mul(self.left, d0), transpose(inverse_unimodular(self.right)))

    def representatives(self):
        """Coset representatives of L_C / C Lambda, lexicographic in Smith coordinates."""
        for x in range(self.d1):
            for t in range(self.d1):
                for y in range(self.d2):
                    yield (x, t, y), self.smith_to_d(x, t, y)


def compatible_d_lattice(cm: Mat2) -> DLattice:
    u, d1, d2, v = smith_normal_form(cm)
    p = inverse_unimodular(u)
    r = inverse_unimodular(v)
    e = d2 // d1
    rt_inv = transpose(inverse_unimodular(r))
    gens = tuple(mul(mul(p, g), rt_inv) for g in ((1, 0, 0, 0), (0, 1, e, 0), (0, 0, 0, 1)))
    sub_gens = tuple(mul(cm, s) for s in ((1, 0, 0, 0), (0, 1, 1, 0), (0, 0, 0, 1)))
    return DLattice(cm, d1, d2, p, r, SymLatticeBasis(gens), SymLatticeBasis(sub_gens))


def in_c_lambda(cm: Mat2, dm: Mat2) -> bool:
    """True iff C^{-1} D is an integral symmetric matrix."""
    dc = det(cm)
    x = mul(adjugate(cm), dm)
    return x[1] == x[2] and all(v % dc == 0 for v in x)


# --------------------------------------------------------------------------
# eigenvalues of T C^{-1} Q C^{-T}


def eigen_pair(t: QuadForm2, q: QuadForm2, cm: Mat2) -> tuple[float, float]:
    """(lambda_min, lambda_max) of T C^{-1} Q C^{-T} from its exact trace and determinant."""
    dc = det(cm)
    if dc == 0:
        raise ValueError(f"singular matrix {cm}")
    tr, dt = eigen_invariants(t, q, cm)
    return _eig_from(tr, dt)


def eigen_invariants(t: QuadForm2, q: QuadForm2, cm: Mat2) -> tuple[Fraction, Fraction]:
    dc = det(cm)
    adj = adjugate(cm)
    # C^{-1} Q C^{-T} = adj (2Q) adj^T / (2 det^2)
    m = mul(mul(adj, q.doubled()), transpose(adj))
    prod = mul(t.doubled(), m)
    tr = Fraction(trace(prod), 4 * dc * dc)
    dt = t.det * q.det / (dc * dc)
    return tr, dt


def _eig_from(tr, dt) -> tuple[float, float]:
    tr = float(tr)
    dt = float(dt)
    disc = max(tr * tr - 4 * dt, 0.0)
    big = 0.5 * (tr + math.sqrt(disc))
    return dt / big, big


def scalar_eigen_pair(mn: int, det_c: int, frob_sq: int) -> tuple[float, float]:
    """Eigenvalues of mn C^{-1} C^{-T}; they depend on C only through det and |C|_F^2."""
    d2 = det_c * det_c
    return _eig_from(Fraction(mn * frob_sq, d2), Fraction(mn * mn, d2))
