"""Geometric side of the degree-two Petersson formula for scalar arguments.

Delta_k(mI, nI) = diagonal + (sqrt(2) pi / 8) G1 + pi^2 G2, where G1 is the rank-one
sum over (s, c, U, V) and G2 the rank-two sum over nonsingular integer C.  Every
truncation is backed by an explicit envelope, and the discarded mass is returned
as a tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expsums, intlat, kernels, specfun
from .intlat import QuadForm2

RANK1_CONST = math.sqrt(2.0) * math.pi / 8.0
RANK2_CONST = math.pi ** 2

RADIUS_CAP = 200
MATRIX_BUDGET = 120_000_000


@dataclass(frozen=True)
class DeltaBreakdown:
    diagonal: float
    rank1: float
    rank2: float
    rank1_tail_bound: float
    rank2_tail_bound: float
    total: float
    radius: int = 0
    capped: bool = False
    rank2_imag: float = 0.0
    exact_matrices: int = 0

    @property
    def tail_bound(self) -> float:
        return RANK1_CONST * self.rank1_tail_bound + RANK2_CONST * self.rank2_tail_bound


@dataclass(frozen=True)
class AveragedDeltaReport:
    m: int
    n: int
    K: float
    value: float
    reference_error_budget: float
    k_grid: list[int]
    weights: list[float]
    tail_bound: float = 0.0
    per_k: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------
# diagonal term


def diagonal_term(m: int, n: int, k: int) -> float:
    """Diagonal contribution for (T, Q) = (mI, nI); exactly delta_{m = n}."""
    if m < 1 or n < 1:
        raise ValueError("m, n must be positive")
    return 1.0 if m == n else 0.0


def diagonal_term_forms(t: QuadForm2, q: QuadForm2, k: int) -> float:
    """(1/8) |Aut T| (det Q / det T)^{k/2 - 3/4} delta_{Q ~ T} for general forms."""
    if not intlat.is_equivalent(t, q):
        return 0.0
    ratio = float(q.det / t.det)
    return len(intlat.aut_group(t)) / 8.0 * ratio ** (k / 2 - 0.75)


# --------------------------------------------------------------------------
# rank-one term


def _log_j_envelope(ell: float, x: float) -> float:
    return float(specfun.bessel_envelope_log(ell, x))


def _rank1_tail(mn: int, ell: float, n0: int) -> float:
    """Bound for the rank-one terms with c s > n0.

    Per (c, s): two signs, at most (2 sqrt(s) + 1)^2 pairs (U, V) after the U sign
    quotient, |H| <= c^2, |J_l(x)| <= (x/2)^l / Gamma(l + 1) with x = 4 pi mn / (c s).
    c^{1/2} s^{-1/2} (2 sqrt s + 1)^2 <= 9 sqrt(c s) and the number of splittings
    N = c s is at most 2 sqrt N, so the N-th block is <= 36 N (2 pi mn / N)^l / Gamma(l+1).
    """
    if ell <= 2.0:
        return math.inf
    log_x = math.log(2 * math.pi * mn)
    # sum_{N > n0} N^{1 - l} <= n0^{2 - l} / (l - 2) + n0^{1 - l} is generous for n0 >= 1
    base = math.log(36.0) + ell * log_x - math.lgamma(ell + 1.0)
    tail = math.exp(base + (2.0 - ell) * math.log(n0)) / (ell - 2.0)
    return tail


def _rank1_cutoff(mn: int, ell: float, tol: float, max_cs: int) -> int:
    n0 = 1
    while _rank1_tail(mn, ell, n0) > tol and n0 < max_cs:
        n0 *= 2
    return n0


def rank1_unsigned(m: int, n: int, k: int, n0: int) -> float:
    """G1 without the (-1)^{k/2} factor, summed over c s <= n0."""
    ell = k - 1.5
    mn = m * n
    # n | s and m | s, so s runs over multiples of lcm(m, n)
    step = mn // math.gcd(m, n)
    terms: list[float] = []
    for s in range(step, n0 + 1, step):
        pairs = expsums.rank1_pairs(s, m, n)
        if not pairs:
            continue
        forms = [expsums.rank1_forms(u, v, m, n) for u, v in pairs]
        for c in range(1, n0 // s + 1):
            jv, _ = specfun.bessel_j_half(ell, 4 * math.pi * mn / (c * s))
            if jv == 0.0:
                continue
            hs = 0j
            for p, sform in forms:
                for sg in (1, -1):
                    hs += expsums.h_sum(p, sform, c, sg).value
            terms.append(c ** -1.5 * s ** -0.5 * hs.real * jv)
    return math.fsum(terms)


def rank1_term(m: int, n: int, k: int, tol: float = 1e-10, max_cs: int = 100_000) -> tuple[float, float]:
    """G1 for (T, Q) = (mI, nI), with an explicit bound for the omitted (c, s) range."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if m < 1 or n < 1:
        raise ValueError("m, n must be positive")
    ell = k - 1.5
    n0 = _rank1_cutoff(m * n, ell, tol, max_cs)
    sign_k = -1.0 if (k // 2) % 2 else 1.0
    return sign_k * rank1_unsigned(m, n, k, n0), _rank1_tail(m * n, ell, n0)


# --------------------------------------------------------------------------
# rank-two term: enumeration and envelopes


def _disk_points(r2: int) -> tuple[np.ndarray, np.ndarray]:
    """All (x, y) with x^2 + y^2 <= r2, sorted by norm then lexicographically."""
    r = math.isqrt(r2)
    xs, ys = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    nrm = xs * xs + ys * ys
    keep = nrm <= r2
    xs, ys, nrm = xs[keep], ys[keep], nrm[keep]
    order = np.lexsort((ys, xs, nrm))
    pts = np.stack([xs[order], ys[order]], axis=1).astype(np.int64)
    return pts, nrm[order].astype(np.int64)


def shell_matrices(lo2: int, hi2: int):
    """Yield int64 arrays of nonsingular C with lo2 < |C|_F^2 <= hi2, in a fixed order."""
    pts, nrm = _disk_points(hi2)
    for (a, b), rho in zip(pts, nrm):
        i0 = np.searchsorted(nrm, lo2 - rho, side="right")
        i1 = np.searchsorted(nrm, hi2 - rho, side="right")
        if i1 <= i0:
            continue
        cd = pts[i0:i1]
        dets = a * cd[:, 1] - b * cd[:, 0]
        cd = cd[dets != 0]
        if cd.size == 0:
            continue
        out = np.empty((cd.shape[0], 4), dtype=np.int64)
        out[:, 0] = a
        out[:, 1] = b
        out[:, 2:] = cd
        yield out


def count_ball(r: float) -> float:
    """Rigorous upper bound for #{C in Z^4 : |C|_F <= r}: the volume of the 4-ball of radius r + 1."""
    return 0.5 * math.pi ** 2 * (r + 1.0) ** 4


@dataclass(frozen=True)
class Rank2Envelope:
    """Per-matrix envelope data for the scalar pipeline with product mn and order l."""

    mn: int
    ell: float

    @property
    def w1(self) -> float:
        return specfun._wallis(self.ell + 1)

    @property
    def w2(self) -> float:
        return specfun._wallis(2 * self.ell + 1)

    def eigen(self, det: np.ndarray, frob2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d2 = det.astype(float) ** 2
        tr = self.mn * frob2.astype(float) / d2
        dt = float(self.mn) ** 2 / d2
        big = 0.5 * (tr + np.sqrt(np.maximum(tr * tr - 4 * dt, 0.0)))
        return dt / big, big

    def envelope(self, det: np.ndarray, frob2: np.ndarray, d1: np.ndarray) -> np.ndarray:
        """(d1/sqrt|det|) min(1, a1 W(l+1), a1 a2 W(2l+1)) >= |K| |J(C)| / |det|^{3/2}."""
        lmin, lmax = self.eigen(det, frob2)
        la1 = specfun.bessel_envelope_log(self.ell, 4 * np.pi * np.sqrt(lmin))
        la2 = specfun.bessel_envelope_log(self.ell, 4 * np.pi * np.sqrt(lmax))
        lw = np.minimum(np.minimum(0.0, la1 + math.log(self.w1)), la1 + la2 + math.log(self.w2))
        return d1 / np.sqrt(np.abs(det).astype(float)) * np.exp(lw)

    def beyond_radius(self, radius: float) -> float:
        """Bound for the envelope mass of all C with |C|_F > radius.

        lambda_min <= 2 mn / |C|_F^2 gives an envelope A r^{-l}; Abel summation against
        count_ball turns it into sum_j binom(4, j) A l R^{j - l} / (l - j) (times pi^2/2).
        """
        ell = self.ell
        if ell <= 4.0:
            return math.inf
        log_a, _ = self._log_ab()
        r = float(radius)
        # below the crossover A r^{-l} >= 1 the envelope is capped at 1 and the bound is useless
        if log_a - ell * math.log(r) > 0:
            return math.inf
        total = 0.0
        for j, b in enumerate((1, 4, 6, 4, 1)):
            total += b * ell / (ell - j) * math.exp(log_a + (j - ell) * math.log(r))
        return 0.5 * math.pi ** 2 * total

    def _log_ab(self) -> tuple[float, float]:
        ell = self.ell
        log_a = ell * math.log(2 * math.pi * math.sqrt(2.0 * self.mn)) - math.lgamma(ell + 1) + math.log(self.w1)
        log_b = (2 * ell * math.log(2 * math.pi) + ell * math.log(self.mn) - 2 * math.lgamma(ell + 1)
                 + math.log(self.w2))
        return log_a, log_b

    def beyond_radius_by_det(self, radius: float, dmax: int = 100_000) -> float:
        """Sharper bound for |C|_F > radius that also uses lambda_1 lambda_2 = (mn/det)^2."""
        return self.region_tail(dmax, radius, dmax)

    def region_tail(self, d0: int, radius: float, dmax: int = 100_000) -> float:
        """Envelope mass of every C outside {1 <= |det C| <= d0, |C|_F <= radius}.

        For |det| = d the matrices with |C|_F <= r number at most
        N_d(r) = alpha r^2 + beta r + gamma with
        alpha = 12 pi sigma_{-1} + 2 pi sigma_{-2}, beta = 44 tau + 4 pi sigma_{-1}, gamma = 2 pi tau
        (first row v, then lattice points w on the two lines v ^ w = +-d).  The envelope is
        at most min(1, A r^{-l}, B d^{-l}) since d1 <= sqrt(d); Abel summation against N_d
        bounds each determinant class.
        """
        per_r, per_0 = self._per_det_tables(radius, dmax)
        d0 = min(int(d0), dmax)
        return float(per_r[:d0].sum() + per_0[d0:].sum()) + self._beyond_dmax(dmax)

    def _per_det_tables(self, radius: float, dmax: int) -> tuple[np.ndarray, np.ndarray]:
        log_a, log_b = self._log_ab()
        sig1, sig2, tau = _divisor_sums(dmax)
        d = np.arange(1, dmax + 1, dtype=float)
        per_r = self._per_det(radius, d, sig1, sig2, tau, log_a, log_b)
        per_0 = self._per_det(0.0, d, sig1, sig2, tau, log_a, log_b)
        return per_r, per_0

    def _beyond_dmax(self, dmax: int) -> float:
        # d > dmax in dyadic blocks with sigma_{-1} <= 1 + ln d, sigma_{-2} <= pi^2/6, tau <= 2 sqrt d
        if self.ell <= 3.0:
            return math.inf
        log_a, log_b = self._log_ab()
        total = 0.0
        lo = float(dmax + 1)
        while True:
            hi = 2.0 * lo
            block = self._per_det_bound(0.0, lo, 1.0 + math.log(hi), math.pi ** 2 / 6, 2.0 * math.sqrt(hi),
                                        log_a, log_b) * (hi - lo)
            total += block
            if block <= 1e-30 * max(total, 1e-300) or lo > 1e18:
                return total
            lo = hi

    def choose_region(self, target: float, budget: float, radius_cap: int = RADIUS_CAP,
                      dmax: int = 100_000) -> tuple[int, int, float, bool]:
        """(d0, R, tail, capped): the cheapest enumeration region whose tail is <= target,
        or the best tail affordable within ``budget`` matrices."""
        sig1, _, _ = _divisor_sums(dmax)
        cum_sig = np.cumsum(sig1)
        best = None
        fallback = None
        for radius in range(2, radius_cap + 1):
            per_r, per_0 = self._per_det_tables(radius, dmax)
            # tail(d0) = sum_{d <= d0} per_r + sum_{d > d0} per_0, for d0 = 1..dmax
            tails = np.cumsum(per_r) + (per_0.sum() - np.cumsum(per_0)) + self._beyond_dmax(dmax)
            # d0 is only useful up to the largest determinant inside the ball
            dlim = max(1, min(dmax, radius * radius // 2))
            cost = 12.0 * cum_sig[:dlim] * radius * radius
            ok = np.nonzero((tails[:dlim] <= target) & (cost <= budget))[0]
            if ok.size:
                i = int(ok[0])
                cand = (float(cost[i]), i + 1, radius, float(tails[i]))
                if best is None or cand[0] < best[0]:
                    best = cand
            afford = np.nonzero(cost <= budget)[0]
            if afford.size:
                j = int(afford[np.argmin(tails[afford])])
                cand = (float(tails[j]), j + 1, radius)
                if fallback is None or cand[0] < fallback[0]:
                    fallback = cand
            if best is not None and 12.0 * radius * radius > best[0]:
                break
            if afford.size == 0:
                break
        if best is not None:
            return best[1], best[2], best[3], False
        if fallback is None:
            raise ValueError("matrix budget too small for any enumeration region")
        return fallback[1], fallback[2], fallback[0], True

    def _per_det(self, radius, d, sig1, sig2, tau, log_a, log_b, always_flat: bool = False) -> np.ndarray:
        ell = self.ell
        alpha = 12 * math.pi * sig1 + 2 * math.pi * sig2
        beta = 44.0 * tau + 4 * math.pi * sig1
        gamma = 2 * math.pi * tau
        log_bd = np.minimum(0.0, log_b - ell * np.log(d))
        # the envelope is flat (= B_d) until r_d, then A r^{-l}
        r_d = np.exp((log_a - log_bd) / ell)
        flat_lo = np.maximum(float(radius), np.sqrt(2.0 * d))
        r0 = np.maximum(flat_lo, r_d)
        la = math.exp(log_a)
        part = la * ell * (alpha * r0 ** (2 - ell) / (ell - 2) + beta * r0 ** (1 - ell) / (ell - 1)
                           + gamma * r0 ** (-ell) / ell)
        flat = np.exp(log_bd) * (alpha * r_d ** 2 + beta * r_d + gamma)
        if not always_flat:
            flat = np.where(r_d > flat_lo, flat, 0.0)
        return part + flat

    def _per_det_bound(self, radius, d_lo, sig1, sig2, tau, log_a, log_b) -> float:
        """Upper bound of the per-det term over d >= d_lo given majorants of the divisor sums."""
        # r0 and r_d only grow with d and B_d N_d(r_d) = A (alpha r_d^{2-l} + ...) shrinks with r_d,
        # so the value at d_lo with majorised divisor sums and the flat part always on bounds the block
        return float(self._per_det(radius, np.array([d_lo]), np.array([sig1]), np.array([sig2]),
                                   np.array([tau]), log_a, log_b, always_flat=True)[0])


_DIVISOR_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _divisor_sums(dmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """sigma_{-1}, sigma_{-2} and tau for 1..dmax."""
    if dmax not in _DIVISOR_CACHE:
        s1 = np.zeros(dmax + 1)
        s2 = np.zeros(dmax + 1)
        tau = np.zeros(dmax + 1)
        for g in range(1, dmax + 1):
            s1[g::g] += 1.0 / g
            s2[g::g] += 1.0 / (g * g)
            tau[g::g] += 1.0
        _DIVISOR_CACHE[dmax] = (s1[1:], s2[1:], tau[1:])
    return _DIVISOR_CACHE[dmax]


# --------------------------------------------------------------------------
# rank-two term: enumeration of small-determinant matrices and exact evaluation


def strip_matrices(r2: int, d0: int):
    """Yield int64 arrays of C with |C|_F^2 <= r2 and 1 <= |det C| <= d0, one block per first row.

    For a first row v = (a, b) with g = gcd(a, b), the second rows with det = t
    (g | t) are w_t + j (a, b)/g, and the disk condition is a quadratic interval in j.
    """
    pts, nrm = _disk_points(r2)
    for (a, b), rho in zip(pts.tolist(), nrm.tolist()):
        if rho == 0 or rho > r2:
            continue
        g, x, y = intlat.egcd(a, b)
        # a x + b y = g, so (c, e) = (-y, x) has a e - b c = g
        tq = np.arange(-(d0 // g), d0 // g + 1, dtype=np.int64)
        tq = tq[tq != 0]
        if tq.size == 0:
            continue
        ua, ub = a // g, b // g
        uu = ua * ua + ub * ub
        c0 = -y * tq
        e0 = x * tq
        room = r2 - rho
        # |w0 + j u|^2 <= room  <=>  uu j^2 + 2 j (w0 . u) + |w0|^2 - room <= 0
        wu = (c0 * ua + e0 * ub).astype(float)
        ww = (c0 * c0 + e0 * e0).astype(float)
        disc = wu * wu - uu * (ww - room)
        live = disc >= 0
        if not np.any(live):
            continue
        sq = np.sqrt(np.maximum(disc, 0.0))
        jlo = np.ceil((-wu - sq) / uu - 1e-9).astype(np.int64)
        jhi = np.floor((-wu + sq) / uu + 1e-9).astype(np.int64)
        cnt = np.where(live, np.maximum(jhi - jlo + 1, 0), 0)
        total = int(cnt.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(tq.size), cnt)
        offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        j = jlo[rep] + offs
        c = c0[rep] + j * ua
        e = e0[rep] + j * ub
        # the float interval is padded; enforce the exact integer condition
        keep = (c * c + e * e) <= room
        out = np.empty((int(keep.sum()), 4), dtype=np.int64)
        out[:, 0] = a
        out[:, 1] = b
        out[:, 2] = c[keep]
        out[:, 3] = e[keep]
        yield out


_SIGNED_PERMS = np.array([
    [[1, 0], [0, 1]], [[-1, 0], [0, 1]], [[1, 0], [0, -1]], [[-1, 0], [0, -1]],
    [[0, 1], [1, 0]], [[0, -1], [1, 0]], [[0, 1], [-1, 0]], [[0, -1], [-1, 0]],
], dtype=np.int64)


def orbit_keys(cs: np.ndarray, bound: int) -> np.ndarray:
    """Canonical key of each C under C -> O1 C O2 with O1, O2 signed permutations.

    For scalar Q and T these maps preserve K(Q, T; C), |det C| and |C|_F.
    """
    base = 2 * bound + 1
    m = cs.reshape(-1, 2, 2)
    best = None
    for left in _SIGNED_PERMS:
        lm = np.einsum("ij,njk->nik", left, m)
        for right in _SIGNED_PERMS:
            t = np.einsum("nij,jk->nik", lm, right).reshape(-1, 4) + bound
            key = ((t[:, 0] * base + t[:, 1]) * base + t[:, 2]) * base + t[:, 3]
            best = key if best is None else np.minimum(best, key)
    return best


def decode_key(key: int, bound: int) -> intlat.Mat2:
    base = 2 * bound + 1
    out = []
    for _ in range(4):
        key, r = divmod(key, base)
        out.append(r - bound)
    return (out[3], out[2], out[1], out[0])


@dataclass(frozen=True)
class Rank2Result:
    value: float
    tail_bound: float
    d0: int
    radius: int
    capped: bool
    imag: float
    exact_matrices: int
    orbits: int


class Rank2Engine:
    """G2 for (T, Q) = (mI, nI); caches Kloosterman sums per orbit across weights."""

    def __init__(self, m: int, n: int):
        if m < 1 or n < 1:
            raise ValueError("m, n must be positive")
        self.m = m
        self.n = n
        self.q = QuadForm2.scalar(n)
        self.t = QuadForm2.scalar(m)
        self._k_cache: dict[intlat.Mat2, complex] = {}

    def kloosterman(self, cm: intlat.Mat2) -> complex:
        val = self._k_cache.get(cm)
        if val is None:
            val = expsums.sym_kloosterman_fast(self.q, self.t, cm)
            self._k_cache[cm] = val
        return val

    def evaluate(self, k: int, tol: float = 1e-8, budget: float = 3e7,
                 radius_cap: int = RADIUS_CAP, chunk: int = 2_000_000) -> Rank2Result:
        if tol <= 0:
            raise ValueError("tol must be positive")
        ell = k - 1.5
        env = Rank2Envelope(self.m * self.n, ell)
        d0, radius, region_tail, capped = env.choose_region(0.5 * tol, budget, radius_cap)
        r2 = radius * radius
        # first pass: envelopes only, to find which matrices can be dropped
        e_parts = []
        for cs in _chunked(strip_matrices(r2, d0), chunk):
            det, frob2, d1 = _matrix_stats(cs)
            e_parts.append(env.envelope(det, frob2, d1))
        e_all = np.concatenate(e_parts) if e_parts else np.zeros(0)
        del e_parts
        thresh, skipped = _skip_threshold(e_all, 0.5 * tol)
        del e_all
        # second pass: exact terms for everything at or above the threshold
        base = 4 * r2 + 1
        known_k = np.zeros(0, dtype=np.int64)
        vals_k = np.zeros(0, dtype=complex)
        known_p = np.zeros(0, dtype=np.int64)
        vals_j = np.zeros(0)
        errs_j = np.zeros(0)
        re_parts: list[float] = []
        im_parts: list[float] = []
        quad_err = 0.0
        n_exact = 0
        for cs in _chunked(strip_matrices(r2, d0), chunk):
            det, frob2, d1 = _matrix_stats(cs)
            keep = env.envelope(det, frob2, d1) >= thresh
            if not np.any(keep):
                continue
            cs, det, frob2 = cs[keep], det[keep], frob2[keep]
            n_exact += cs.shape[0]
            ukeys, inv = np.unique(orbit_keys(cs, radius), return_inverse=True)
            new = _missing(known_k, ukeys)
            if new.size:
                nv = np.array([self.kloosterman(decode_key(int(u), radius)) for u in new])
                known_k, vals_k = _merge(known_k, new, vals_k, nv)
            kv = vals_k[np.searchsorted(known_k, ukeys)][inv]
            # script_j depends on C only through |det| and |C|_F^2
            pair = np.abs(det) * base + frob2
            upair, pinv = np.unique(pair, return_inverse=True)
            new = _missing(known_p, upair)
            if new.size:
                lmin, lmax = env.eigen(new // base, new % base)
                jv, jerr = kernels.script_j_many(lmin, lmax, ell)
                known_p, (vals_j, errs_j) = _merge_many(known_p, new, (vals_j, errs_j), (jv, jerr))
            pos = np.searchsorted(known_p, upair)[pinv]
            weight = np.abs(det).astype(float) ** -1.5
            terms = kv * weight * vals_j[pos]
            # |K| <= d1^2 d2 and the quadrature error of each script_j value
            quad_err += float(np.sum(weight * np.abs(kv) * errs_j[pos]))
            re_parts.append(math.fsum(terms.real.tolist()))
            im_parts.append(math.fsum(terms.imag.tolist()))
        return Rank2Result(math.fsum(re_parts), skipped + region_tail + quad_err, d0, radius, capped,
                           math.fsum(im_parts), n_exact, int(known_k.size))


def _chunked(blocks, size: int):
    """Regroup the per-row blocks into arrays of at least `size` rows."""
    buf: list[np.ndarray] = []
    held = 0
    for b in blocks:
        buf.append(b)
        held += b.shape[0]
        if held >= size:
            yield np.concatenate(buf)
            buf, held = [], 0
    if buf:
        yield np.concatenate(buf)


def _matrix_stats(cs: np.ndarray):
    det = cs[:, 0] * cs[:, 3] - cs[:, 1] * cs[:, 2]
    frob2 = np.sum(cs * cs, axis=1)
    d1 = np.gcd(np.gcd(cs[:, 0], cs[:, 1]), np.gcd(cs[:, 2], cs[:, 3]))
    return det, frob2, d1


def _skip_threshold(e: np.ndarray, allowance: float) -> tuple[float, float]:
    """Smallest kept envelope value and the total of everything strictly below it.

    Envelopes are dropped in increasing order while their sum stays within the
    allowance; ties at the cut are kept whole."""
    if e.size == 0:
        return math.inf, 0.0
    se = np.sort(e)
    csum = np.cumsum(se)
    n_skip = int(np.searchsorted(csum, allowance, side="right"))
    if n_skip >= se.size:
        return math.inf, float(csum[-1])
    thresh = float(se[n_skip])
    first = int(np.searchsorted(se, thresh, side="left"))
    return thresh, float(csum[first - 1]) if first else 0.0


def _missing(known: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Entries of the sorted array keys absent from the sorted array known."""
    if known.size == 0:
        return keys
    pos = np.minimum(np.searchsorted(known, keys), known.size - 1)
    return keys[known[pos] != keys]


def _merge(known, new, vals, new_vals):
    keys, (out,) = _merge_many(known, new, (vals,), (new_vals,))
    return keys, out


def _merge_many(known, new, vals, new_vals):
    keys = np.concatenate([known, new])
    order = np.argsort(keys, kind="stable")
    return keys[order], tuple(np.concatenate([v, nv])[order] for v, nv in zip(vals, new_vals))


def rank2_term(m: int, n: int, k: int, tol: float = 1e-8, budget: float = 3e7) -> tuple[float, float]:
    """G2 for (T, Q) = (mI, nI) and the bound on everything not evaluated exactly."""
    res = Rank2Engine(m, n).evaluate(k, tol, budget)
    return res.value, res.tail_bound


def delta_k(m: int, n: int, k: int, tol: float = 1e-8, engine: Rank2Engine | None = None,
            budget: float = 3e7) -> DeltaBreakdown:
    """Delta_k(mI, nI) from the geometric side."""
    if k < 6 or k % 2:
        raise ValueError("k must be even and >= 6")
    diag = diagonal_term(m, n, k)
    r1, t1 = rank1_term(m, n, k, tol)
    eng = engine if engine is not None else Rank2Engine(m, n)
    r2 = eng.evaluate(k, tol, budget)
    total = diag + RANK1_CONST * r1 + RANK2_CONST * r2.value
    return DeltaBreakdown(diag, r1, r2.value, t1, r2.tail_bound, total, r2.radius, r2.capped,
                          r2.imag, r2.exact_matrices)


# --------------------------------------------------------------------------
# weight averages

BUMP_FLOOR = 1e-15


def weight_grid(K: float) -> tuple[list[int], list[float]]:
    """Even k >= 6 with Omega(k / K) above the floor, and their weights."""
    if K <= 0:
        raise ValueError("K must be positive")
    ks = [k for k in range(6, int(2.5 * K) + 2, 2)]
    ws = specfun.bump(np.array(ks, dtype=float) / K)
    pairs = [(k, float(w)) for k, w in zip(ks, ws) if w > BUMP_FLOOR]
    return [k for k, _ in pairs], [w for _, w in pairs]


def averaged_error_budget(m: int, n: int, K: float, eps: float = 0.1, j: int = 4) -> float:
    """Reference error curve for the weight average with all implied constants set to 1."""
    mn = m * n
    return (m ** (1.5 - eps) * n ** (-0.5 + eps) / K ** 4
            + mn ** (2 + eps) / K ** (5 + 2 * eps)
            + mn ** (j / 2 + 1) / K ** (2 * j + 3))


def averaged_delta(m: int, n: int, K: float, tol: float = 1e-6, budget: float = 3e7) -> AveragedDeltaReport:
    """Omega(k/K)-weighted average of Delta_k(mI, nI) over even k, evaluated term by term.

    Each Delta_k is computed to a tolerance scaled by the inverse of its weight, so the
    weighted truncation error of the average stays below tol."""
    if K < 12:
        raise ValueError("K must be >= 12")
    if tol <= 0:
        raise ValueError("tol must be positive")
    ks, ws = weight_grid(K)
    wsum = math.fsum(ws)
    eng = Rank2Engine(m, n)
    per_k: list[float] = []
    tails: list[float] = []
    for k, w in zip(ks, ws):
        tol_k = min(1e-2, tol * wsum / (len(ks) * w))
        d = delta_k(m, n, k, tol_k, engine=eng, budget=budget)
        per_k.append(d.total)
        tails.append(w * d.tail_bound)
    value = math.fsum(w * v for w, v in zip(ws, per_k)) / wsum
    return AveragedDeltaReport(m, n, K, value, averaged_error_budget(m, n, K), ks, ws,
                               math.fsum(tails) / wsum, per_k)


def ksum_bessel(x: float, K: float) -> float:
    """sum over even k of Omega(k/K) (-1)^{k/2} J_{k-3/2}(x)."""
    if x <= 0 or K <= 0:
        raise ValueError("x and K must be positive")
    ks = np.arange(2, int(2.5 * K) + 2, 2)
    ws = specfun.bump(ks / K)
    terms = []
    for k, w in zip(ks.tolist(), ws.tolist()):
        if w == 0.0:
            continue
        jv = float(specfun.bessel_j_half_array(k - 1.5, np.array([x]))[0])
        terms.append(w * (-1.0 if (k // 2) % 2 else 1.0) * jv)
    return math.fsum(terms)
