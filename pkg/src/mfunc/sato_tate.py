"""Quadrature and sampling for the Sato-Tate measure (2/pi) sin^2(theta) dtheta."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class STQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, func) -> float:
        """Sum of ``weights * func(nodes)``; ``func`` must accept arrays."""
        return np.tensordot(self.weights, func(self.nodes), axes=(0, 0))


@lru_cache(maxsize=32)
def st_quadrature(order: int) -> STQuadrature:
    """Gauss-Chebyshev rule of the second kind, pulled back to theta.

    With ``c = cos(theta)`` the measure becomes ``(2/pi) sqrt(1 - c^2) dc``, for
    which the nodes ``theta_j = j pi / (n + 1)`` and weights
    ``2 sin^2(theta_j) / (n + 1)`` integrate polynomials in ``c`` of degree
    up to ``2n - 1`` exactly.
    """
    if int(order) != order or order < 2:
        raise ValidationError(f"quadrature order must be an integer >= 2, got {order}")
    n = int(order)
    theta = np.arange(1, n + 1) * (math.pi / (n + 1))
    weights = 2.0 * np.sin(theta) ** 2 / (n + 1)
    theta.setflags(write=False)
    weights.setflags(write=False)
    return STQuadrature(theta, weights, n)


def _cdf(theta):
    return (theta - np.sin(theta) * np.cos(theta)) / math.pi


def st_cdf(theta: float) -> float:
    """Mass of the Sato-Tate measure on ``[0, theta]``."""
    if not (0.0 <= theta <= math.pi):
        raise ValidationError(f"theta={theta} outside [0, pi]")
    return float(_cdf(theta))


def st_density(theta):
    return (2.0 / math.pi) * np.sin(theta) ** 2


@dataclass(eq=False)
class STSampler:
    """Deterministic i.i.d. stream of Sato-Tate angles.

    One sampler per consumer; use :meth:`spawn` to derive independent
    per-worker streams from a root seed.
    """

    seed: int
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._seq = np.random.SeedSequence(self.seed)
        self.rng = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n: int) -> list["STSampler"]:
        children = []
        for child in self._seq.spawn(n):
            s = STSampler.__new__(STSampler)
            s.seed = self.seed
            s._seq = child
            s.rng = np.random.Generator(np.random.PCG64(child))
            children.append(s)
        return children


def _invert_cdf(v: np.ndarray, xtol: float = 1e-12) -> np.ndarray:
    lo = np.zeros_like(v)
    hi = np.full_like(v, math.pi)
    # halving pi down to xtol needs a fixed number of steps
    steps = int(math.ceil(math.log2(math.pi / xtol))) + 1
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = _cdf(mid) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def st_sample(sampler: STSampler, n, chunk: int = 1 << 18) -> np.ndarray:
    """Draw ``n`` angles (``n`` may be a shape tuple) by bisection on the CDF."""
    shape = (n,) if np.isscalar(n) else tuple(n)
    total = int(np.prod(shape))
    if total < 1:
        raise ValidationError("need at least one sample")
    out = np.empty(total)
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        out[start:stop] = _invert_cdf(sampler.rng.random(stop - start))
    return out.reshape(shape)
