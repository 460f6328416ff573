import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siegel_lowlying import primes


def _trial_division(n):
    if n < 2:
        return False
    return all(n % q for q in range(2, math.isqrt(n) + 1))


def test_small_sieve():
    assert primes.prime_sieve(10).tolist() == [2, 3, 5, 7]
    assert primes.prime_sieve(2).tolist() == [2]
    with pytest.raises(ValueError):
        primes.prime_sieve(1)


def test_prime_count_million():
    assert primes.prime_sieve(10 ** 6).size == 78498


def test_sieve_output_is_prime():
    ps = primes.prime_sieve(20000).tolist()
    assert all(_trial_division(p) for p in ps)
    assert len(ps) == sum(_trial_division(n) for n in range(20001))


# the recursion starts from Euler-Maclaurin values at sqrt(N), so it is only used for large N
@pytest.mark.parametrize("twisted", [False, True])
@pytest.mark.parametrize("N", [10 ** 6, 2_000_003, 10 ** 7])
def test_lucy_matches_direct(N, twisted):
    direct = primes.direct_log_moments(N, 3, twisted)
    lucy = np.array(primes.lucy_log_moments(N, 3, twisted))
    scale = np.maximum(1.0, np.abs(direct))
    assert np.all(np.abs(direct - lucy) <= 1e-11 * scale)


@settings(max_examples=15, deadline=None)
@given(st.integers(10 ** 6, 4 * 10 ** 6), st.booleans())
def test_lucy_matches_direct_property(N, twisted):
    direct = primes.direct_log_moments(N, 2, twisted)
    lucy = np.array(primes.lucy_log_moments(N, 2, twisted))
    assert np.all(np.abs(direct - lucy) <= 1e-11 * np.maximum(1.0, np.abs(direct)))


def test_lucy_start_values_limit_small_N():
    # at N = 10 the Euler-Maclaurin start at sqrt(N) = 3 is visibly off
    direct = primes.direct_log_moments(10, 1, False)
    lucy = np.array(primes.lucy_log_moments(10, 1, False))
    assert 1e-6 < np.max(np.abs(direct - lucy)) < 1e-2


def test_mertens_shape():
    # sum_{p <= x} log p / p = log x - 1.3325... + o(1)
    x = 1e9
    val = primes.log_moments(x, 1, False)[1]
    assert val - math.log(x) == pytest.approx(-1.3325822757, abs=2e-3)


def test_twisted_mertens_constant():
    # sum chi(p) log p / p converges; the partial sums settle at large x
    a = primes.log_moments(1e8, 1, True)[1]
    b = primes.log_moments(1e10, 1, True)[1]
    assert abs(a - b) < 2e-3


def test_log_moments_switches_method():
    x = primes.DIRECT_LIMIT + 1001
    a = primes.log_moments(x, 2, False)
    b = primes.direct_log_moments(x, 2, False)
    assert np.allclose(a, b, rtol=1e-10, atol=0)
