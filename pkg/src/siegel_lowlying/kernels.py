"""Compiled inner loops: batched half-integer Bessel products and the theta integral.

These mirror the numpy reference implementations in :mod:`specfun` and are
checked against them in the tests.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .specfun import _LOG_UNDERFLOW, _RESCALE, _leggauss


@numba.njit(cache=True)
def jhalf(n: int, x: float) -> float:
    """J_{n + 1/2}(x) for x > 0."""
    nu = n + 0.5
    logenv = nu * math.log(x / 2.0) - math.lgamma(nu + 1.0)
    if logenv < _LOG_UNDERFLOW:
        return 0.0
    if x >= nu:
        s = math.sin(x)
        c = math.cos(x)
        pre = math.sqrt(2.0 / (math.pi * x))
        j0 = pre * s
        if n == 0:
            return j0
        j1 = pre * (s / x - c)
        for k in range(1, n):
            mu = k + 0.5
            j0, j1 = j1, (2.0 * mu / x) * j1 - j0
        return j1
    if x * x <= 4.0 * (nu + 1.0):
        q = -(x * x) / 4.0
        term = 1.0
        total = 1.0
        for j in range(1, 200):
            term = term * q / (j * (nu + j))
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
        return math.exp(logenv) * total
    top = n + 20 + int(math.ceil(10.0 * x ** (1.0 / 3.0)))
    f_next = 0.0
    f = 1e-30
    f_target = 0.0
    for k in range(top, -1, -1):
        mu = k + 0.5
        if k == n:
            f_target = f
        f_prev = (2.0 * mu / x) * f - f_next
        f_next = f
        f = f_prev
        if abs(f) > _RESCALE:
            f /= _RESCALE
            f_next /= _RESCALE
            if k <= n:
                f_target /= _RESCALE
    g_half = f_next
    g_mhalf = f
    norm = math.sqrt(2.0 / (math.pi * x)) / math.hypot(g_half, g_mhalf)
    if abs(math.sin(x)) >= abs(math.cos(x)):
        sign = math.copysign(1.0, math.sin(x)) * math.copysign(1.0, g_half)
    else:
        sign = math.copysign(1.0, math.cos(x)) * math.copysign(1.0, g_mhalf)
    return sign * f_target * norm


@numba.njit(cache=True)
def _theta_rule(n_ord: int, x1: float, x2: float, nodes: np.ndarray, weights: np.ndarray) -> float:
    total = 0.0
    for i in range(nodes.size):
        s = math.sin(nodes[i])
        a = jhalf(n_ord, x1 * s)
        if a == 0.0:
            continue
        total += weights[i] * a * jhalf(n_ord, x2 * s) * s
    return total


@numba.njit(cache=True)
def _script_j_batch(n_ord, x1, x2, tol, all_nodes, all_weights, offsets, sizes, out, err):
    levels = sizes.size
    for i in range(x1.size):
        lev = 0
        # start where the rule resolves the oscillation, but leave one level to refine into
        while lev < levels - 2 and sizes[lev] < 2.0 * max(x1[i], x2[i]):
            lev += 1
        o = offsets[lev]
        prev = _theta_rule(n_ord, x1[i], x2[i], all_nodes[o:o + sizes[lev]], all_weights[o:o + sizes[lev]])
        e = math.inf
        cur = prev
        while lev < levels - 1:
            lev += 1
            o = offsets[lev]
            cur = _theta_rule(n_ord, x1[i], x2[i], all_nodes[o:o + sizes[lev]], all_weights[o:o + sizes[lev]])
            e = abs(cur - prev)
            if e < tol or e < tol * abs(cur):
                break
            prev = cur
        out[i] = cur
        err[i] = e


_RULES: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}


def _stacked_rules(levels: int = 12):
    if levels not in _RULES:
        sizes = np.array([16 * 2 ** j for j in range(levels)], dtype=np.int64)
        nodes, weights = [], []
        for n in sizes:
            x, w = _leggauss(int(n))
            nodes.append((x + 1.0) * (math.pi / 4.0))
            weights.append(w * (math.pi / 4.0))
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        _RULES[levels] = (np.concatenate(nodes), np.concatenate(weights), offsets, sizes)
    return _RULES[levels]


def script_j_many(lambda1: np.ndarray, lambda2: np.ndarray, ell: float, tol: float = 1e-13):
    """Vectorised script_j over pairs of eigenvalues; returns (values, error estimates)."""
    n_ord = int(round(ell - 0.5))
    if abs(ell - 0.5 - n_ord) > 1e-12 or n_ord < 0:
        raise ValueError(f"order must be a half-integer, got {ell}")
    l1 = np.ascontiguousarray(lambda1, dtype=float)
    l2 = np.ascontiguousarray(lambda2, dtype=float)
    if np.any(l1 <= 0) or np.any(l2 <= 0):
        raise ValueError("eigenvalues must be positive")
    x1 = 4 * np.pi * np.sqrt(l1)
    x2 = 4 * np.pi * np.sqrt(l2)
    nodes, weights, offsets, sizes = _stacked_rules()
    out = np.empty_like(x1)
    err = np.empty_like(x1)
    _script_j_batch(n_ord, x1, x2, tol, nodes, weights, offsets, sizes, out, err)
    return out, err
