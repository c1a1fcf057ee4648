"""Prime enumeration and the finite prime sets used by every product."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .errors import ValidationError


def is_prime(n: int) -> bool:
    """Deterministic trial division; adequate for level primes."""
    if n < 2 or int(n) != n:
        return False
    n = int(n)
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    f = 5
    while f * f <= n:
        if n % f == 0 or n % (f + 2) == 0:
            return False
        f += 6
    return True


@lru_cache(maxsize=8)
def _sieve(limit: int) -> np.ndarray:
    if limit < 2:
        out = np.empty(0, dtype=np.int64)
    else:
        flags = np.ones(limit + 1, dtype=bool)
        flags[:2] = False
        flags[4::2] = False
        for p in range(3, math.isqrt(limit) + 1, 2):
            if flags[p]:
                flags[p * p :: 2 * p] = False
        out = np.flatnonzero(flags).astype(np.int64)
    out.setflags(write=False)
    return out


def primes_up_to(y: float) -> np.ndarray:
    """All primes ``p <= y`` as a read-only int64 array.

    The sieve is rounded up to the next power of two so that growing cutoffs
    reuse one cached table.
    """
    n = int(math.floor(y))
    if n < 2:
        return np.empty(0, dtype=np.int64)
    limit = 1 << max(10, (n - 1).bit_length())
    table = _sieve(limit)
    return table[: np.searchsorted(table, n, side="right")]


def prime_pi(y: float) -> int:
    return int(primes_up_to(y).size)


@dataclass(frozen=True)
class PrimeSet:
    """The primes ``p <= bound`` with ``p != excluded``, ascending."""

    excluded: Optional[int]
    bound: float
    members: tuple = field(repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, p) -> bool:
        return p in self._lookup

    @property
    def _lookup(self) -> frozenset:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = frozenset(self.members)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def as_array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def issubset(self, other: "PrimeSet") -> bool:
        return self._lookup <= other._lookup

    @classmethod
    def from_primes(cls, primes, excluded: Optional[int] = None) -> "PrimeSet":
        """Build an explicit (not necessarily initial-segment) prime set."""
        ps = sorted(set(int(p) for p in primes))
        for p in ps:
            if not is_prime(p):
                raise ValidationError(f"{p} is not prime")
        if excluded is not None and excluded in ps:
            raise ValidationError(f"excluded prime {excluded} listed as a member")
        return cls(excluded, float(ps[-1]) if ps else 0.0, tuple(ps))


def prime_set(q: Optional[int], y: float) -> PrimeSet:
    """Primes up to ``y`` excluding the level prime ``q``.

    ``y < 2`` gives the empty set; a non-prime ``q`` is rejected.

    >>> prime_set(7, 10).members
    (2, 3, 5)
    """
    if q is not None and not is_prime(q):
        raise ValidationError(f"excluded level q={q} is not prime")
    ps = primes_up_to(y)
    if q is not None:
        ps = ps[ps != q]
    return PrimeSet(None if q is None else int(q), float(y), tuple(int(p) for p in ps))


def prime_power_tail_bound(s: float, y: float) -> float:
    """Upper bound on ``sum_{p > y} p^-s`` for ``s > 1``, ``y >= 2``.

    Partial summation gives ``-pi(y) y^-s + s int_y^inf pi(t) t^(-s-1) dt``;
    the integral uses ``pi(t) < 1.25506 t / log t`` (``t > 1``) and the
    boundary term ``pi(y) > y / log y`` (``y >= 17``).
    """
    if not s > 1:
        raise ValidationError(f"exponent must exceed 1, got {s}")
    if y < 2:
        raise ValidationError(f"cutoff must be at least 2, got {y}")
    scale = y ** (1.0 - s) / math.log(y)
    bound = 1.25506 * s / (s - 1.0) * scale
    if y >= 17:
        bound -= scale
    return bound
