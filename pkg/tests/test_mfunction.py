import math

import numpy as np
import pytest

from frozen import FINITE_23_S1_R2_X1
from mfunc.errors import NonDecayingTransform, ToleranceNotMet, ValidationError
from mfunc.local import LocalParams, local_density, local_transform_quadrature, st_mean_G
from mfunc.mfunction import (LimitMarker, fit_decay_exponent, finite_density_convolution,
                             finite_transform, finite_transform_table, invert_density,
                             invert_table, limit_transform, limit_transform_table, mc_compare,
                             one_minus_constant, support_interval, transform_table)
from mfunc.primes import PrimeSet, prime_power_tail_bound, prime_set, primes_up_to
from oracles import local_transform_mp


def test_finite_at_zero():
    assert finite_transform(PrimeSet.from_primes([2, 3, 5]), 1.0, 1, 0.0) == 1


def test_finite_factorwise_oracle():
    v = finite_transform(PrimeSet.from_primes([2, 3]), 1.0, 2, 1.0, tol=1e-12)
    assert abs(v - FINITE_23_S1_R2_X1) <= 1e-11
    direct = local_transform_mp(2, 1.0, 2, 1.0) * local_transform_mp(3, 1.0, 2, 1.0)
    assert abs(v - direct) <= 1e-11


def test_finite_rejects_empty_and_bad_tol():
    with pytest.raises(ValidationError):
        finite_transform(PrimeSet.from_primes([]), 1.0, 1, 1.0)
    with pytest.raises(ValidationError):
        finite_transform(PrimeSet.from_primes([2]), 1.0, 1, 1.0, tol=0.0)
    with pytest.raises(ValidationError):
        finite_transform(PrimeSet.from_primes([2]), 0.5, 1, 1.0)


def test_monotone_under_inclusion():
    rng = np.random.default_rng(3)
    pool = primes_up_to(60)
    xs = np.array([0.3, 1.0, 4.0, 15.0, 70.0])
    for _ in range(4):
        big = np.sort(rng.choice(pool, size=8, replace=False))
        small = big[: 3]
        a = np.abs(finite_transform_table(PrimeSet.from_primes(big), 0.8, 1, xs, 1e-11).values)
        b = np.abs(finite_transform_table(PrimeSet.from_primes(small), 0.8, 1, xs, 1e-11).values)
        assert np.all(a <= b + 1e-12)


def test_limit_at_zero():
    t = limit_transform_table(7, 1.2, 2, [0.0], 1e-8)
    assert t.values[0] == 1 and t.err[0] <= 1e-8 and t.converged[0]


def test_limit_tail_oracle_sigma_two():
    ref = finite_transform(prime_set(None, 100), 2.0, 1, 1.0, tol=1e-11)
    lim = limit_transform(None, 2.0, 1, 1.0, tol=1e-10)
    bound = float(one_minus_constant(np.array([1.0]), 2.0, 1, 100)[0]) * prime_power_tail_bound(4.0, 100)
    assert abs(lim - ref) < bound
    # the bound is not vacuous
    assert bound < 1e-3


def test_limit_doubled_cutoff():
    xs = np.array([0.5, 2.0, 8.0])
    t = limit_transform_table(None, 1.5, 1, xs, 1e-7)
    assert t.converged.all()
    for x, v, y in zip(xs, t.values, t.cutoff):
        more = finite_transform(prime_set(None, 2 * y), 1.5, 1, x, tol=1e-9)
        assert abs(more - v) < 1e-7 + 1e-9


def test_limit_best_effort_report():
    t = limit_transform_table(None, 0.7, 1, [3.0], 1e-10, y_max=1e4)
    assert not t.converged[0] and t.err[0] > 1e-10
    with pytest.raises(ToleranceNotMet) as exc:
        limit_transform(None, 0.7, 1, 3.0, tol=1e-10, y_max=1e4)
    assert exc.value.err == pytest.approx(t.err[0])


def test_limit_rejects_composite_q():
    with pytest.raises(ValidationError):
        limit_transform_table(9, 1.2, 1, [1.0], 1e-8)


def test_support_interval_finite():
    lo, hi = support_interval(PrimeSet.from_primes([2]), 1.0, 1)
    assert lo == pytest.approx(-2 * math.log(1.5)) and hi == pytest.approx(2 * math.log(2))


@pytest.fixture(scope="module")
def limit_density():
    us = np.linspace(-2, 4, 601)
    return invert_density(7, 1.2, 2, us, x_max=200, x_step=0.05, tol=1e-8)


def test_inversion_mass_and_sign(limit_density):
    d = limit_density
    assert abs(d.mass - 1) <= max(d.mass_err, 1e-4)
    assert np.all(d.values >= -d.err)


def test_inversion_fourier_duality(limit_density):
    d = limit_density
    for x in (0.0, 1.0, 5.0):
        fwd = np.trapezoid(d.values * np.exp(1j * x * d.u_grid), d.u_grid) / math.sqrt(2 * math.pi)
        ref = limit_transform(7, 1.2, 2, x, tol=1e-6)
        assert abs(fwd - ref) <= 1e-3


def test_inversion_matches_convolution_small_set():
    us = np.linspace(-2.5, 3.0, 600)
    pset = PrimeSet.from_primes([2, 3])
    inv = invert_density(pset, 1.2, 1, us, x_max=400, x_step=0.05, tol=1e-10)
    conv = finite_density_convolution(pset, 1.2, 1, us)
    assert np.max(np.abs(inv.values - conv.values)) <= 1e-4


def test_non_decaying_refused():
    # one prime with r = 2 has an inverse-square-root singularity: decay x^-1/2
    one = PrimeSet.from_primes([2])
    with pytest.raises(NonDecayingTransform, match="> 0.1"):
        invert_density(one, 1.0, 2, np.linspace(0, 2, 11), x_max=20)
    with pytest.raises(NonDecayingTransform, match="exponent"):
        invert_density(one, 1.0, 2, np.linspace(0, 2, 11), x_max=400, x_step=0.1)


def test_invert_table_validates_grid():
    t = finite_transform_table(PrimeSet.from_primes([2, 3, 5]), 1.0, 1, np.linspace(0.1, 10, 11), 1e-8)
    with pytest.raises(ValidationError):
        invert_table(t, [0.0, 1.0])


def test_single_prime_convolution_is_local_density():
    us = np.linspace(-0.7, 1.3, 201)
    d = finite_density_convolution(PrimeSet.from_primes([2]), 1.0, 1, us)
    ref = local_density(us, LocalParams(2, 1.0, 1))
    np.testing.assert_allclose(d.values, ref, rtol=1e-12, atol=1e-14)


def test_convolution_mass_and_support():
    us = np.linspace(-3, 4, 701)
    pset = PrimeSet.from_primes([2, 3, 5])
    d = finite_density_convolution(pset, 1.2, 2, us)
    assert abs(d.mass - 1) <= d.mass_err + 1e-4
    lo, hi = d.meta["support"]
    assert np.all(d.values[(us < lo) | (us > hi)] == 0)


def test_convolution_grid_too_coarse():
    with pytest.raises(ValidationError):
        finite_density_convolution(PrimeSet.from_primes([2, 101]), 1.0, 1, np.linspace(-3, 3, 40))


def test_mc_compare_small():
    pset = PrimeSet.from_primes([2, 3, 5, 7])
    rep = mc_compare(pset, 1.0, 2, 20000, seed=11, x_panel=(0.0, 0.5, 1.0, 2.0))
    assert rep.ecf[0] == 1
    assert rep.passed(4.0)
    expected = sum(st_mean_G(LocalParams(p, 1.0, 2)) for p in (2, 3, 5, 7))
    assert rep.mean_expected == pytest.approx(expected, rel=1e-14)


def test_mc_compare_sample_floor():
    with pytest.raises(ValidationError):
        mc_compare(PrimeSet.from_primes([2]), 1.0, 1, 999, seed=0)


def test_fit_decay_exponent_recovers_power():
    xs = np.linspace(100, 10000, 5000)
    vals = 3.0 * xs ** -1.5 * np.cos(xs)
    fit = fit_decay_exponent(xs, vals)
    assert fit.exponent == pytest.approx(1.5, abs=0.02)
    # the envelope covers each log-bin maximum, so any point is within one bin ratio
    ratio = (10000 / 100) ** (1 / 24)
    assert np.all(np.abs(vals) <= fit.amplitude * xs ** -fit.exponent * ratio ** fit.exponent)


def test_transform_table_dispatch():
    xs = [0.0, 1.0]
    a = transform_table(PrimeSet.from_primes([3]), 1.0, 1, xs, 1e-10)
    assert a.values[1] == pytest.approx(local_transform_quadrature(1.0, LocalParams(3, 1.0, 1), 1e-12))
    b = transform_table(LimitMarker(3), 1.5, 1, xs, 1e-8)
    assert isinstance(b.prime_set, LimitMarker)
