import json
import math

import numpy as np
import pytest

from mfunc.errors import MissingEigenvalues, ParseError, ValidationError
from mfunc.local import LocalParams, value_interval
from mfunc.mfunction import finite_transform
from mfunc.newforms import (damping_scale, empirical_average, euler_product, hecke_lambda,
                            hecke_prime_power, make_record, parse_newforms, partial_log_L,
                            petersson_check, s_r_sum, synthetic_batch, write_newforms,
                            LevelBatch)
from mfunc.primes import PrimeSet, primes_up_to
from oracles import hecke_from_angle


def _line(q=7, m=1, k=2, w=1.0, ap=None):
    ap = {"2": 0.5, "3": -1.0, "7": 7 ** -0.5} if ap is None else ap
    return json.dumps({"q": q, "m": m, "k": k, "harmonic_weight": w, "ap": ap})


def test_parse_empty_file(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    assert parse_newforms(path) == []


def test_parse_one_record(tmp_path):
    path = tmp_path / "one.jsonl"
    path.write_text(_line() + "\n")
    batches = parse_newforms(path)
    assert len(batches) == 1 and len(batches[0]) == 1
    f = batches[0].forms[0]
    assert f.eigenvalue(3) == -1.0 and f.warnings == ()


def test_parse_deligne_warning(tmp_path):
    path = tmp_path / "w.jsonl"
    path.write_text(_line(ap={"3": 2.5, "7": 7 ** -0.5}) + "\n")
    f = parse_newforms(path)[0].forms[0]
    assert "Deligne bound violated at p=3" in f.warnings


def test_parse_malformed_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(_line() + "\n" + "{not json\n")
    with pytest.raises(ParseError) as exc:
        parse_newforms(path)
    assert exc.value.line == 2 and "line 2" in str(exc.value)


def test_parse_missing_field(tmp_path):
    path = tmp_path / "mf.jsonl"
    path.write_text(json.dumps({"q": 7, "m": 1, "k": 2, "ap": {}}) + "\n")
    with pytest.raises(ParseError) as exc:
        parse_newforms(path)
    assert exc.value.line == 1 and "harmonic_weight" in str(exc.value)


def test_write_read_round_trip(tmp_path):
    batch = synthetic_batch(11, 1, 2, 5, primes_up_to(30), seed=4)
    path = tmp_path / "rt.jsonl"
    write_newforms(path, [batch])
    back = parse_newforms(path)[0]
    assert [f.eigenvalues for f in back.forms] == [f.eigenvalues for f in batch.forms]
    assert np.array_equal(back.weights, batch.weights)


def test_grouping_by_level(tmp_path):
    path = tmp_path / "g.jsonl"
    path.write_text("\n".join([_line(q=11, ap={}), _line(q=7, ap={}), _line(q=11, ap={})]) + "\n")
    batches = parse_newforms(path)
    assert [(b.q, len(b)) for b in batches] == [(7, 1), (11, 2)]


def test_structural_errors():
    with pytest.raises(ValidationError):
        make_record(8, 1, 2, 1.0, {})
    with pytest.raises(ValidationError):
        make_record(7, 1, 3, 1.0, {})
    with pytest.raises(ValidationError):
        make_record(7, 1, 2, 0.0, {})
    with pytest.raises(ValidationError):
        LevelBatch(7, 1, 2, ())


CUT = -math.log(1e-16)
PS = PrimeSet.from_primes([2, 3, 5, 11])


def _zero_form(q=7):
    return make_record(q, 2, 2, 1.0, {p: 0.0 for p in (2, 3, 5, 7, 11)})


def test_partial_log_L_zero_eigenvalues():
    f = _zero_form()
    s = 0.9
    r1 = sum(-math.log1p(p ** (-2 * s)) for p in PS)
    r2 = sum(-2 * math.log1p(p ** -s) - math.log1p(-p ** -s) for p in PS)
    assert partial_log_L(f, PS, s, 1) == pytest.approx(r1, rel=1e-14)
    assert partial_log_L(f, PS, s, 2) == pytest.approx(r2, rel=1e-14)


def test_partial_log_L_boundary():
    f = make_record(7, 1, 2, 1.0, {3: 2.0, 7: 7 ** -0.5})
    v = partial_log_L(f, PrimeSet.from_primes([3]), 1.0, 1)
    assert v == pytest.approx(value_interval(LocalParams(3, 1.0, 1)).hi, rel=1e-14)


def test_partial_log_L_rejects_level_prime():
    with pytest.raises(ValidationError):
        partial_log_L(_zero_form(), PrimeSet.from_primes([7]), 1.0, 1)


def test_missing_eigenvalues_listed():
    f = make_record(7, 1, 2, 1.0, {2: 0.1})
    with pytest.raises(MissingEigenvalues) as exc:
        partial_log_L(f, PrimeSet.from_primes([2, 3, 5]), 1.0, 1)
    assert exc.value.primes == [3, 5]


def test_euler_identity():
    batch = synthetic_batch(13, 1, 2, 20, primes_up_to(50), seed=8)
    pset = PrimeSet.from_primes([p for p in primes_up_to(50) if p != 13])
    for f in batch.forms:
        a = math.exp(partial_log_L(f, pset, 0.8, 1))
        b = euler_product(f, pset, 0.8)
        assert abs(a - b) <= 1e-12 * abs(b)


def test_empirical_average_at_zero_and_single_form():
    batch = synthetic_batch(7, 1, 2, 10, [2, 3, 5], seed=1)
    pset = PrimeSet.from_primes([2, 3, 5])
    avg, mass = empirical_average(batch, 0.0, pset, 1.0, 1)
    assert avg == pytest.approx(mass) and mass == pytest.approx(1.0)
    f = make_record(7, 1, 2, 0.3, {2: 0.4, 3: -1.1, 5: 1.9, 7: 7 ** -0.5})
    one = LevelBatch(7, 1, 2, (f,))
    avg, _ = empirical_average(one, 2.5, pset, 1.0, 2)
    assert avg == 0.3 * np.exp(2.5j * partial_log_L(f, pset, 1.0, 2))


def test_empirical_average_tracks_transform():
    pset = PrimeSet.from_primes([2, 3, 5])
    batch = synthetic_batch(7, 1, 2, 4000, pset, seed=5)
    for x in (0.5, 1.0, 2.0):
        avg, _ = empirical_average(batch, x, pset, 1.0, 1)
        ref = finite_transform(pset, 1.0, 1, x, 1e-10)
        se = math.sqrt(max(1 - abs(ref) ** 2, 0) / 4000)
        assert abs(avg - ref) <= 4 * se


def test_hecke_recursion():
    assert hecke_prime_power(2.0, 2, False) == 3.0
    for th in (0.3, 1.1, 2.9):
        for e in range(6):
            assert hecke_prime_power(2 * math.cos(th), e, False) == pytest.approx(
                hecke_from_angle(th, e), abs=1e-12)
    assert hecke_prime_power(0.5, 3, True) == 0.125


def test_hecke_lambda_multiplicative():
    f = make_record(7, 1, 2, 1.0, {2: 0.5, 3: -1.2, 7: 7 ** -0.5})
    assert hecke_lambda(f, 1) == 1.0
    assert hecke_lambda(f, 12) == pytest.approx(hecke_prime_power(0.5, 2, False) * -1.2)
    assert hecke_lambda(f, 49) == pytest.approx(1 / 7)
    with pytest.raises(MissingEigenvalues):
        hecke_lambda(f, 10)


def test_petersson_mass_and_first_moment():
    batch = synthetic_batch(7, 1, 2, 5000, [2, 3], seed=2)
    out = petersson_check(batch, 1)
    assert out["sum"] == 1.0 and out["expected"] == 1.0
    big = synthetic_batch(7, 1, 2, 20000, [2], seed=3)
    assert abs(petersson_check(big, 2)["sum"]) <= 4 / math.sqrt(20000)


def test_s_r_sum_examples():
    f = make_record(3, 1, 4, 1.0, {p: 0.0 for p in primes_up_to(2000)})
    assert s_r_sum(f, 0.8, 1) == 0.0
    X = damping_scale(3, 1, 4, 2)
    ps = [p for p in primes_up_to(2000) if p > math.log(3) and p != 3 and p <= CUT * X]
    ref = -math.fsum(p ** -0.8 * math.exp(-p / X) for p in ps)
    assert s_r_sum(f, 0.8, 2) == pytest.approx(ref, rel=1e-13)


def test_s_r_sum_cutoff_converged():
    f = make_record(5, 2, 2, 1.0, {p: 1.0 for p in primes_up_to(5000)})
    X = damping_scale(5, 2, 2, 1)
    a = s_r_sum(f, 0.7, 1)
    b = s_r_sum(f, 0.7, 1, p_cut=2 * CUT * X) if 2 * CUT * X <= 5000 else a
    assert abs(a - b) <= 1e-14


def test_s_r_sum_missing():
    f = make_record(3, 1, 4, 1.0, {2: 0.0, 5: 0.0})
    with pytest.raises(MissingEigenvalues):
        s_r_sum(f, 0.8, 1)
