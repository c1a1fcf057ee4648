import pytest
from hypothesis import given, strategies as st

from mfunc.errors import ValidationError
from mfunc.primes import (PrimeSet, is_prime, prime_pi, prime_power_tail_bound, prime_set,
                          primes_up_to)
from oracles import trial_division_primes


def test_small_examples():
    assert prime_set(7, 10).members == (2, 3, 5)
    assert prime_set(None, 2).members == (2,)
    assert prime_set(2, 30).members == tuple(p for p in trial_division_primes(30) if p != 2)


def test_below_two_is_empty():
    assert len(prime_set(None, 1.5)) == 0
    assert len(prime_set(3, -4)) == 0


def test_rejects_composite_level():
    with pytest.raises(ValidationError):
        prime_set(9, 100)


def test_counting_matches_trial_division():
    oracle = trial_division_primes(100_000)
    assert prime_pi(100_000) == len(oracle) == 9592
    assert primes_up_to(100_000).tolist() == oracle


@given(st.floats(2, 5000), st.floats(2, 5000), st.sampled_from([None, 2, 3, 7, 101]))
def test_nested_in_y(y1, y2, q):
    lo, hi = sorted((y1, y2))
    small, big = prime_set(q, lo), prime_set(q, hi)
    assert small.issubset(big)
    assert set(small.members) <= set(big.members)


@given(st.floats(2, 3000), st.sampled_from([None, 2, 5, 13]))
def test_members_invariants(y, q):
    ps = prime_set(q, y)
    m = ps.members
    assert all(a < b for a, b in zip(m, m[1:]))
    assert all(is_prime(p) and p <= y for p in m)
    assert q not in ps
    assert set(m) == {p for p in trial_division_primes(y) if p != q}


def test_from_primes_validates():
    assert PrimeSet.from_primes([5, 2, 3]).members == (2, 3, 5)
    with pytest.raises(ValidationError):
        PrimeSet.from_primes([4])
    with pytest.raises(ValidationError):
        PrimeSet.from_primes([2, 7], excluded=7)


@pytest.mark.parametrize("s,y", [(2.4, 1000.0), (2.0, 100.0), (3.0, 16.0), (1.5, 50.0)])
def test_prime_tail_bound_dominates(s, y):
    ps = primes_up_to(2_000_000).astype(float)
    partial = float((ps[ps > y] ** -s).sum())
    assert prime_power_tail_bound(s, y) >= partial
