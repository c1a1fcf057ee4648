"""Hecke-eigenvalue data: ingestion, partial symmetric-power log L values,
harmonically weighted averages and Petersson-formula sanity sums.

File format: UTF-8, one JSON object per line, ``#`` lines ignored::

    {"q":7,"m":1,"k":4,"harmonic_weight":0.0123,"ap":{"2":-1.101,"3":0.3344}}

``ap`` holds normalised eigenvalues ``lambda_f(p)`` keyed by decimal primes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingEigenvalues, ParseError, ValidationError
from .local import log_factor_modulus
from .primes import PrimeSet, is_prime, primes_up_to
from .sato_tate import STSampler, st_sample

_LEVEL_TOL = 1e-9
_DAMPING_CUT = -math.log(1e-16)
_USUAL_WEIGHTS = frozenset(range(2, 12, 2)) | {14}


@dataclass(frozen=True)
class NewformRecord:
    q: int
    m: int
    k: int
    harmonic_weight: float
    eigenvalues: Dict[int, float] = field(hash=False)
    warnings: Tuple[str, ...] = ()

    def eigenvalue(self, p: int) -> float:
        try:
            return self.eigenvalues[p]
        except KeyError:
            raise MissingEigenvalues([p]) from None

    def angle(self, p: int) -> float:
        """``theta_f(p) = arccos(lambda_f(p) / 2)``, clamped to ``[0, pi]``."""
        return math.acos(min(1.0, max(-1.0, self.eigenvalue(p) / 2.0)))


@dataclass(frozen=True)
class LevelBatch:
    q: int
    m: int
    k: int
    forms: Tuple[NewformRecord, ...]

    def __post_init__(self):
        if not self.forms:
            raise ValidationError("a level batch needs at least one form")
        for f in self.forms:
            if (f.q, f.m, f.k) != (self.q, self.m, self.k):
                raise ValidationError(
                    f"form at level ({f.q},{f.m},{f.k}) in batch ({self.q},{self.m},{self.k})")

    def __len__(self):
        return len(self.forms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([f.harmonic_weight for f in self.forms])


def record_warnings(q: int, m: int, k: int, eigenvalues: Dict[int, float]) -> List[str]:
    out = []
    if k not in _USUAL_WEIGHTS:
        out.append(f"weight k={k} outside 2 <= k < 12 or k = 14")
    for p in sorted(eigenvalues):
        lam = eigenvalues[p]
        if p != q and abs(lam) > 2.0:
            out.append(f"Deligne bound violated at p={p}")
    if q in eigenvalues:
        lam = eigenvalues[q]
        if m == 1 and abs(lam * lam - 1.0 / q) > _LEVEL_TOL:
            out.append(f"level prime eigenvalue at p={q}: lambda^2={lam * lam:.6g}, expected 1/{q}")
        if m >= 2 and abs(lam) > _LEVEL_TOL:
            out.append(f"level prime eigenvalue at p={q}: lambda={lam:.6g}, expected 0")
    return out


def make_record(q, m, k, harmonic_weight, eigenvalues) -> NewformRecord:
    """Validated constructor; structural problems raise, invariant violations warn."""
    if not is_prime(q):
        raise ValidationError(f"q={q} is not prime")
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m}")
    if int(k) != k or k < 2 or k % 2:
        raise ValidationError(f"k must be an even integer >= 2, got {k}")
    if not (harmonic_weight > 0 and math.isfinite(harmonic_weight)):
        raise ValidationError(f"harmonic_weight must be positive, got {harmonic_weight}")
    eig = {}
    for p, lam in eigenvalues.items():
        p = int(p)
        if not is_prime(p):
            raise ValidationError(f"eigenvalue key {p} is not prime")
        lam = float(lam)
        if not math.isfinite(lam):
            raise ValidationError(f"eigenvalue at p={p} is not finite")
        eig[p] = lam
    q, m, k = int(q), int(m), int(k)
    return NewformRecord(q, m, k, float(harmonic_weight), eig,
                         tuple(record_warnings(q, m, k, eig)))


def _record_from_json(obj, line: int) -> NewformRecord:
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line)
    for key in ("q", "m", "k", "harmonic_weight", "ap"):
        if key not in obj:
            raise ParseError(f"missing field '{key}'", line)
    ap = obj["ap"]
    if not isinstance(ap, dict):
        raise ParseError("field 'ap' must be an object", line)
    for key in ("q", "m", "k"):
        if isinstance(obj[key], bool) or not isinstance(obj[key], int):
            raise ParseError(f"field '{key}' must be an integer", line)
    try:
        keys = {int(s): v for s, v in ap.items()}
    except ValueError as exc:
        raise ParseError(f"bad prime key in 'ap': {exc}", line) from None
    for v in keys.values():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError("eigenvalues must be numbers", line)
    hw = obj["harmonic_weight"]
    if isinstance(hw, bool) or not isinstance(hw, (int, float)):
        raise ParseError("field 'harmonic_weight' must be a number", line)
    try:
        return make_record(obj["q"], obj["m"], obj["k"], float(hw), keys)
    except ValidationError as exc:
        raise ParseError(str(exc), line) from None


def group_batches(records: Iterable[NewformRecord]) -> List[LevelBatch]:
    groups: Dict[Tuple[int, int, int], List[NewformRecord]] = {}
    for rec in records:
        groups.setdefault((rec.q, rec.m, rec.k), []).append(rec)
    return [LevelBatch(*key, tuple(groups[key])) for key in sorted(groups)]


def parse_newforms(path) -> List[LevelBatch]:
    """Read a newform file and group its records by ``(q, m, k)``."""
    records = []
    with open(Path(path), encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", n) from None
            records.append(_record_from_json(obj, n))
    return group_batches(records)


def write_newforms(path, batches: Sequence[LevelBatch]) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        for batch in batches:
            for f in batch.forms:
                obj = {"q": f.q, "m": f.m, "k": f.k, "harmonic_weight": f.harmonic_weight,
                       "ap": {str(p): f.eigenvalues[p] for p in sorted(f.eigenvalues)}}
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


# --------------------------------------------------------------------------
# log L values and averages

def _eigen_matrix(forms: Sequence[NewformRecord], primes: np.ndarray) -> np.ndarray:
    missing = sorted({int(p) for f in forms for p in primes if int(p) not in f.eigenvalues})
    if missing:
        raise MissingEigenvalues(missing)
    return np.array([[f.eigenvalues[int(p)] for p in primes] for f in forms], dtype=float)


def _check_set(pset: PrimeSet, q: int):
    if q in pset:
        raise ValidationError(f"prime set contains the level prime q={q}")


def log_L_values(forms: Sequence[NewformRecord], pset: PrimeSet, sigma: float, r: int) -> np.ndarray:
    if r not in (1, 2):
        raise ValidationError(f"r must be 1 or 2, got {r}")
    if not sigma > 0.5:
        raise ValidationError(f"sigma must exceed 1/2, got {sigma}")
    primes = pset.as_array()
    lam = _eigen_matrix(forms, primes)
    theta = np.arccos(np.clip(lam / 2.0, -1.0, 1.0))
    w = primes.astype(float) ** (-sigma)
    terms = np.column_stack([-log_factor_modulus(r * theta[:, j], w[j])
                             for j in range(w.size)]) if w.size else np.zeros((len(forms), 0))
    if r == 2:
        terms = terms - np.log1p(-w)
    return terms.sum(axis=1)


def partial_log_L(f: NewformRecord, pset: PrimeSet, sigma: float, r: int) -> float:
    """``sum_{p in pset} G_p(r theta_f(p))``: the log of the partial Euler
    product of the symmetric power (``r = 1`` the form itself)."""
    _check_set(pset, f.q)
    return float(log_L_values([f], pset, sigma, r)[0])


def empirical_average(batch: LevelBatch, x: float, pset: PrimeSet, sigma: float, r: int):
    """``(sum_f w_f exp(i x log L_f), sum_f w_f)``."""
    _check_set(pset, batch.q)
    vals = log_L_values(batch.forms, pset, sigma, r)
    wts = batch.weights
    avg = complex(np.sum(wts * np.exp(1j * x * vals)))
    return avg, math.fsum(wts)


def euler_product(f: NewformRecord, pset: PrimeSet, sigma: float) -> float:
    """Literal ``prod_p (1 - lambda_f(p) p^-sigma + p^-2sigma)^-1``."""
    out = 1.0
    for p in pset:
        ps = float(p) ** (-sigma)
        out /= 1.0 - f.eigenvalue(p) * ps + ps * ps
    return out


# --------------------------------------------------------------------------
# Hecke eigenvalues at composite n

def _factor(n: int) -> List[Tuple[int, int]]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def hecke_prime_power(lam_p: float, e: int, bad: bool) -> float:
    """``lambda(p^e)``: ``lambda(p)^e`` at the level prime, otherwise the
    recursion ``lambda(p^(l+1)) = lambda(p) lambda(p^l) - lambda(p^(l-1))``."""
    if bad:
        return lam_p ** e
    prev, cur = 1.0, lam_p
    if e == 0:
        return 1.0
    for _ in range(e - 1):
        prev, cur = cur, lam_p * cur - prev
    return cur


def hecke_lambda(f: NewformRecord, n: int) -> float:
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    fac = _factor(int(n))
    missing = [p for p, _ in fac if p not in f.eigenvalues]
    if missing:
        raise MissingEigenvalues(missing)
    out = 1.0
    for p, e in fac:
        out *= hecke_prime_power(f.eigenvalues[p], e, p == f.q)
    return out


def petersson_check(batch: LevelBatch, n: int) -> dict:
    """Weighted sum of ``lambda_f(n)`` with its target ``delta_{1,n}`` and the
    size ``n^((k-1)/2) min(q^(1/2-k), q^(-m-1/2))`` of the error term."""
    vals = [f.harmonic_weight * hecke_lambda(f, n) for f in batch.forms]
    q, m, k = batch.q, batch.m, batch.k
    bound = n ** ((k - 1) / 2.0) * min(q ** (0.5 - k), q ** (-m - 0.5))
    return {"sum": math.fsum(vals), "expected": 1.0 if n == 1 else 0.0, "bound": bound}


def damping_scale(q: int, m: int, k: int, r: int) -> float:
    return float(q) ** (m / ((k - 1) * r))


def s_r_sum(f: NewformRecord, sigma: float, r: int, y_lo: Optional[float] = None,
            p_cut: Optional[float] = None) -> float:
    """``sum_{y_lo < p <= P_cut, p != q} lambda_f(p^r) p^-sigma exp(-p / X)``
    with ``X = q^(m/((k-1) r))``.  ``P_cut`` defaults to the point where the
    damping falls below ``1e-16``; ``y_lo`` defaults to ``log q^m``."""
    if r not in (1, 2):
        raise ValidationError(f"r must be 1 or 2, got {r}")
    scale = damping_scale(f.q, f.m, f.k, r)
    if y_lo is None:
        y_lo = f.m * math.log(f.q)
    if p_cut is None:
        p_cut = _DAMPING_CUT * scale
    ps = primes_up_to(p_cut)
    ps = ps[(ps > y_lo) & (ps != f.q)]
    for p in ps:
        if int(p) not in f.eigenvalues:
            raise MissingEigenvalues([int(p)])
    lam = np.array([f.eigenvalues[int(p)] for p in ps])
    lam_r = lam if r == 1 else lam * lam - 1.0
    pf = ps.astype(float)
    return float(math.fsum(lam_r * pf ** (-sigma) * np.exp(-pf / scale)))


# --------------------------------------------------------------------------
# synthetic data

def synthetic_batch(q: int, m: int, k: int, n_forms: int, primes: Iterable[int], seed: int,
                    ) -> LevelBatch:
    """Forms with i.i.d. Sato-Tate angles at every listed prime other than
    ``q`` and equal weights ``1 / n_forms``; ``lambda(q)`` is ``+-q^(-1/2)``
    for ``m = 1`` and 0 otherwise."""
    if n_forms < 1:
        raise ValidationError("need at least one form")
    good = [int(p) for p in sorted(set(int(p) for p in primes)) if p != q]
    sampler = STSampler(seed)
    theta = st_sample(sampler, (n_forms, len(good))) if good else np.zeros((n_forms, 0))
    signs = sampler.rng.integers(0, 2, size=n_forms) * 2 - 1
    lam = 2.0 * np.cos(theta)
    weight = 1.0 / n_forms
    forms = []
    for i in range(n_forms):
        eig = {p: float(lam[i, j]) for j, p in enumerate(good)}
        eig[q] = float(signs[i]) / math.sqrt(q) if m == 1 else 0.0
        forms.append(make_record(q, m, k, weight, eig))
    return LevelBatch(q, m, k, tuple(forms))
