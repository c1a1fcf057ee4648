"""Products of local transforms over primes, their limit, and the densities
obtained from them by Fourier inversion or by iterated convolution.

Transforms are normalised as ``int M(u) e^{ixu} du / sqrt(2 pi)`` so that
``M~(0) = 1``; inversion uses ``M(u) = int M~(x) e^{-ixu} dx / sqrt(2 pi)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.stats import chi2 as chi2_dist

from .errors import NonDecayingTransform, NumericalError, ToleranceNotMet, ValidationError
from .gseries import block_product, local_transform
from .local import (SQRT_2PI, LocalParams, _density_from_theta, _theta_of_u, local_density,
                    script_g, st_mean_G, value_interval)
from .primes import PrimeSet, is_prime, prime_power_tail_bound, prime_set, primes_up_to
from .sato_tate import STSampler, st_sample

SMALL_PRIME_LIMIT = 1000
BLOCK_TOL = 1e-12
DEFAULT_Y_MAX = 1e6


@dataclass(frozen=True)
class LimitMarker:
    """Stands in for the infinite set of primes other than ``q``."""

    q: Optional[int]

    def __repr__(self):
        return f"LimitMarker(q={self.q})"


@dataclass(frozen=True, eq=False)
class TransformTable:
    sigma: float
    r: int
    prime_set: Union[PrimeSet, LimitMarker]
    x_grid: np.ndarray
    values: np.ndarray
    err: np.ndarray
    converged: np.ndarray
    cutoff: Optional[np.ndarray] = None

    def __len__(self):
        return self.x_grid.size


@dataclass(frozen=True, eq=False)
class DensityGrid:
    sigma: float
    r: int
    u_grid: np.ndarray
    values: np.ndarray
    err: np.ndarray
    mass: float
    mass_err: float
    meta: dict = field(default_factory=dict)


def _threads() -> int:
    try:
        n = int(os.environ.get("MFUNC_THREADS", "1"))
    except ValueError:
        raise ValidationError("MFUNC_THREADS must be an integer")
    return max(1, n)


def _ordered_map(func, items):
    """``map`` with results in input order; parallel when MFUNC_THREADS > 1."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def _validate(sigma, r, tol=None):
    if not sigma > 0.5:
        raise ValidationError(f"sigma must exceed 1/2, got {sigma}")
    if r not in (1, 2):
        raise ValidationError(f"r must be 1 or 2, got {r}")
    if tol is not None and not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")


# --------------------------------------------------------------------------
# finite products

def _small_product(primes: Sequence[int], sigma, r, xs, tol_each):
    """Per-prime preferred evaluator, multiplied out.  Returns
    ``(values, err_sum, ok)`` with ``err_sum`` the sum of factor errors."""
    vals = np.ones(xs.size, dtype=complex)
    errs = np.zeros(xs.size)
    ok = np.ones(xs.size, dtype=bool)
    results = _ordered_map(lambda p: local_transform(xs, LocalParams(int(p), sigma, r), tol_each),
                           list(primes))
    for v, e, k in results:
        vals *= v
        errs += e
        ok &= k
    return vals, errs, ok


def _large_product(primes: np.ndarray, sigma, r, xs, active=None):
    vals = np.ones(xs.size, dtype=complex)
    errs = np.zeros(xs.size)
    ok = np.ones(xs.size, dtype=bool)
    if primes.size == 0:
        return vals, errs, ok
    ws = primes.astype(float) ** (-sigma)
    idx = np.flatnonzero(active) if active is not None else np.arange(xs.size)

    def one(i):
        return block_product(ws, float(xs[i]), r, BLOCK_TOL)

    for i, (v, e, k) in zip(idx, _ordered_map(one, list(idx))):
        vals[i], errs[i], ok[i] = v, e, k
    return vals, errs, ok


def _product(primes, sigma, r, xs, tol):
    primes = np.asarray(primes, dtype=np.int64)
    small = primes[primes <= SMALL_PRIME_LIMIT]
    large = primes[primes > SMALL_PRIME_LIMIT]
    tol_each = tol / max(1, primes.size)
    v1, e1, k1 = _small_product(small, sigma, r, xs, tol_each)
    v2, e2, k2 = _large_product(large, sigma, r, xs)
    return v1 * v2, e1 + e2, k1 & k2


def finite_transform_table(pset: PrimeSet, sigma: float, r: int, xs, tol: float) -> TransformTable:
    _validate(sigma, r, tol)
    if len(pset) == 0:
        raise ValidationError("prime set is empty")
    xs = np.asarray(xs, dtype=float)
    vals, esum, ok = _product(pset.as_array(), sigma, r, xs, tol)
    err = np.expm1(esum)
    return TransformTable(sigma, r, pset, xs, vals, err, ok & (err <= tol))


def finite_transform(pset: PrimeSet, sigma: float, r: int, x: float, tol: float = 1e-8) -> complex:
    """``prod_{p in pset}`` of local transforms at ``x``, error at most ``tol``."""
    t = finite_transform_table(pset, sigma, r, [x], tol)
    if not t.converged[0]:
        raise ToleranceNotMet(f"finite product at x={x} has error {t.err[0]:.3g} > tol={tol}",
                              complex(t.values[0]), float(t.err[0]))
    return complex(t.values[0])


# --------------------------------------------------------------------------
# limit over all primes except q

def one_minus_constant(xs, sigma, r, y):
    """``C(x, y)`` with ``|M~_p(x) - 1| <= C(x, y) p^(-2 sigma)`` for all ``p > y``."""
    wy = float(y) ** (-sigma)
    delta = 1 if r == 2 else 0
    c1 = 0.5 if r == 1 else 0.5 / (1.0 - wy)
    ax = np.abs(xs)
    return ax * c1 + 0.5 * ax * ax * (2 + delta) ** 2 / (1.0 - wy) ** 2


def tail_factor_bound(xs, sigma, r, y):
    """Bound on ``|prod_{p > y} M~_p(x) - 1|``."""
    return one_minus_constant(xs, sigma, r, y) * prime_power_tail_bound(2.0 * sigma, y)


def _limit_error(vals, esum, xs, sigma, r, y):
    fac = np.expm1(esum)
    head = np.abs(vals) + fac
    return fac, np.minimum(head, 1.0) * np.minimum(2.0, tail_factor_bound(xs, sigma, r, y))


def limit_transform_table(q: Optional[int], sigma: float, r: int, xs, tol: float,
                          y_max: float = DEFAULT_Y_MAX) -> TransformTable:
    """Limit product over primes ``p != q`` on a grid of ``x``.

    The cutoff grows geometrically per grid point until the truncation bound
    falls below ``tol / 2`` or ``y_max`` is reached; grid points that stop at
    ``y_max`` carry their larger error and ``converged = False``.
    """
    _validate(sigma, r, tol)
    if q is not None and not is_prime(q):
        raise ValidationError(f"excluded level q={q} is not prime")
    xs = np.asarray(xs, dtype=float)
    y = float(min(SMALL_PRIME_LIMIT, y_max))
    base = prime_set(q, y)
    vals, esum, ok = _small_product(base.members, sigma, r, xs, tol / (2.0 * max(1, len(base))))
    cutoff = np.full(xs.size, y)
    fac, tail = _limit_error(vals, esum, xs, sigma, r, y)
    active = tail > 0.5 * tol
    while active.any() and y < y_max:
        y_next = min(4.0 * y, float(y_max))
        ps = primes_up_to(y_next)
        ps = ps[ps > y]
        if q is not None:
            ps = ps[ps != q]
        v, e, k = _large_product(ps, sigma, r, xs, active)
        vals[active] *= v[active]
        esum[active] += e[active]
        ok[active] &= k[active]
        cutoff[active] = y_next
        y = y_next
        fac_a, tail_a = _limit_error(vals[active], esum[active], xs[active], sigma, r, y)
        tail[active] = tail_a
        active = active & (tail > 0.5 * tol)
    err = np.expm1(esum) + tail
    return TransformTable(sigma, r, LimitMarker(q), xs, vals, err, ok & (err <= tol), cutoff)


def limit_transform(q: Optional[int], sigma: float, r: int, x: float, tol: float = 1e-8,
                    y_max: float = DEFAULT_Y_MAX, strict: bool = True) -> complex:
    t = limit_transform_table(q, sigma, r, [x], tol, y_max)
    if strict and not t.converged[0]:
        raise ToleranceNotMet(
            f"limit product at x={x} reached cutoff {t.cutoff[0]:.3g} with error {t.err[0]:.3g}",
            complex(t.values[0]), float(t.err[0]))
    return complex(t.values[0])


def transform_table(target: Union[PrimeSet, LimitMarker], sigma: float, r: int, xs,
                    tol: float, y_max: float = DEFAULT_Y_MAX) -> TransformTable:
    if isinstance(target, LimitMarker):
        return limit_transform_table(target.q, sigma, r, xs, tol, y_max)
    return finite_transform_table(target, sigma, r, xs, tol)


# --------------------------------------------------------------------------
# supports

def support_interval(target: Union[PrimeSet, LimitMarker], sigma: float, r: int):
    """Enclosure ``(lo, hi)`` of the support: the Minkowski sum of the local
    value intervals.  For the limit this needs ``sigma > 1``."""
    _validate(sigma, r)
    delta = 1 if r == 2 else 0
    if isinstance(target, PrimeSet):
        ws = target.as_array().astype(float) ** (-sigma)
        shift = -delta * np.log1p(-ws)
        return float(np.sum(-2.0 * np.log1p(ws) + shift)), float(np.sum(-2.0 * np.log1p(-ws) + shift))
    if not sigma > 1:
        return -math.inf, math.inf
    y = 1e6
    ps = primes_up_to(y)
    if target.q is not None:
        ps = ps[ps != target.q]
    ws = ps.astype(float) ** (-sigma)
    shift = -delta * np.log1p(-ws)
    lo = float(np.sum(-2.0 * np.log1p(ws) + shift))
    hi = float(np.sum(-2.0 * np.log1p(-ws) + shift))
    # on p > y each endpoint moves by at most (2 + delta) w / (1 - w)
    spread = (2 + delta) / (1.0 - y ** (-sigma)) * prime_power_tail_bound(sigma, y)
    return lo - spread, hi + spread


# --------------------------------------------------------------------------
# inversion

@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    exponent: float


def fit_decay_exponent(xs, values, bins: int = 24) -> DecayFit:
    """Envelope ``A x^-beta`` dominating ``|values|``: least squares on
    log-binned maxima, then the intercept raised to cover every bin."""
    xs = np.asarray(xs, dtype=float)
    mags = np.maximum(np.abs(np.asarray(values)), 1e-300)
    keep = xs > 0
    xs, mags = xs[keep], mags[keep]
    if xs.size < 4:
        raise ValidationError("need at least four positive sample points to fit decay")
    edges = np.geomspace(xs.min(), xs.max() * (1 + 1e-12), bins + 1)
    which = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, bins - 1)
    lx, lm = [], []
    for b in range(bins):
        sel = which == b
        if sel.any():
            j = np.argmax(np.where(sel, mags, -1.0))
            lx.append(math.log(xs[j]))
            lm.append(math.log(mags[j]))
    lx, lm = np.array(lx), np.array(lm)
    if lx.size < 2:
        raise ValidationError("decay fit needs at least two occupied bins")
    slope, intercept = np.polyfit(lx, lm, 1)
    intercept += max(0.0, float(np.max(lm - (slope * lx + intercept))))
    return DecayFit(float(math.exp(intercept)), float(-slope))


def _x_grid(x_max, x_step):
    if not (x_max > 0 and x_step > 0):
        raise ValidationError("x_max and x_step must be positive")
    n = int(round(x_max / x_step))
    if n < 4:
        raise ValidationError("x grid needs at least four steps")
    n += n % 2
    return np.arange(n + 1) * x_step


def _cos_sin_sum(weights, vals, xs, us):
    out = np.empty(us.size)
    rows = max(1, (1 << 22) // xs.size)
    re, im = (weights * vals.real), (weights * vals.imag)
    for s in range(0, us.size, rows):
        ph = np.outer(us[s : s + rows], xs)
        out[s : s + rows] = np.cos(ph) @ re + np.sin(ph) @ im
    return out


def _trapezoid_mass(us, vals):
    return float(np.trapezoid(vals, us) / SQRT_2PI)


def invert_table(table: TransformTable, u_grid) -> DensityGrid:
    """Trapezoid inversion of a transform sampled on ``0, h, ..., x_max``."""
    xs = table.x_grid
    h = xs[1] - xs[0]
    if abs(xs[0]) > 0 or not np.allclose(np.diff(xs), h, rtol=1e-9, atol=0):
        raise ValidationError("inversion needs a uniform grid starting at x = 0")
    if xs.size % 2 == 0:
        raise ValidationError("inversion needs an even number of x steps")
    us = np.asarray(u_grid, dtype=float)
    if us.size < 2 or np.any(np.diff(us) <= 0):
        raise ValidationError("u_grid must be strictly ascending with at least two points")
    x_max = xs[-1]
    tail_mag = abs(table.values[-1])
    if tail_mag > 0.1:
        raise NonDecayingTransform(
            f"|M~(x_max={x_max:g})| = {tail_mag:.3g} > 0.1; raise x_max")
    scale = 2.0 / SQRT_2PI
    w = np.full(xs.size, h)
    w[0] = w[-1] = 0.5 * h
    fine = scale * _cos_sin_sum(w, table.values, xs, us)
    w2 = np.full(xs.size // 2 + 1, 2 * h)
    w2[0] = w2[-1] = h
    coarse = scale * _cos_sin_sum(w2, table.values[::2], xs[::2], us)
    sample_err = scale * float(np.sum(w * table.err))
    disc_err = np.abs(fine - coarse)
    sel = xs >= x_max / 10.0
    fit = fit_decay_exponent(xs[sel], table.values[sel])
    if fit.exponent <= 1.0:
        raise NonDecayingTransform(
            f"fitted decay exponent {fit.exponent:.3g} <= 1 near x_max={x_max:g}; raise x_max")
    tail_err = 2.0 * fit.amplitude * x_max ** (1.0 - fit.exponent) / (
        (fit.exponent - 1.0) * SQRT_2PI)
    err = sample_err + disc_err + tail_err
    mass = _trapezoid_mass(us, fine)
    mass_err = _trapezoid_mass(us, err) + _mass_rule_err(us, fine)
    meta = {"x_max": float(x_max), "x_step": float(h), "decay_exponent": fit.exponent,
            "tail_err": tail_err, "sample_err": sample_err,
            "converged": bool(np.all(table.converged))}
    return DensityGrid(table.sigma, table.r, us, fine, err, mass, mass_err, meta)


def _mass_rule_err(us, vals):
    if us.size % 2 == 0 or us.size < 5:
        return 0.0
    return abs(_trapezoid_mass(us, vals) - _trapezoid_mass(us[::2], vals[::2]))


def invert_density(target: Union[PrimeSet, LimitMarker, int, None], sigma: float, r: int, u_grid,
                   x_max: float = 200.0, x_step: float = 0.05, tol: float = 1e-8,
                   y_max: float = DEFAULT_Y_MAX) -> DensityGrid:
    """Density from its transform; ``target`` is a prime set, a
    :class:`LimitMarker`, or the excluded prime ``q`` (``None`` for no
    exclusion) meaning the limit."""
    _validate(sigma, r, tol)
    if not isinstance(target, (PrimeSet, LimitMarker)):
        target = LimitMarker(target)
    xs = _x_grid(x_max, x_step)
    table = transform_table(target, sigma, r, xs, tol, y_max)
    return invert_table(table, u_grid)


# --------------------------------------------------------------------------
# convolution on the angle side

_CONV_PANELS = 8
_CONV_NODES = 24


def _smoothstep_rule(panels, nodes):
    t, wt = leggauss(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    s = (mid + half * t).ravel()
    ws = (half * wt).ravel()
    # theta = a + (b - a)(3s^2 - 2s^3) flattens the integrand at every break
    return 3 * s * s - 2 * s ** 3, ws * 6 * s * (1 - s)


def _angle_measure(theta, r):
    return (2.0 / math.pi) * (np.sin(theta) ** 2 if r == 1 else np.sin(0.5 * theta) ** 2)


def _convolve_step(old, old_lo, old_hi, params: LocalParams, us, panels, nodes):
    """``int old(u - G_p(theta)) dmu_r(theta)`` for every ``u``, split where
    ``u - G_p(theta)`` crosses an end of the old support."""
    iv = value_interval(params)
    s, ws = _smoothstep_rule(panels, nodes)
    out = np.zeros(us.size)
    for i, u in enumerate(us):
        if u <= old_lo + iv.lo or u >= old_hi + iv.hi:
            continue
        cuts = [0.0, math.pi]
        for edge in (u - old_lo, u - old_hi):
            if iv.lo < edge <= iv.hi:
                cuts.append(float(_theta_of_u(np.array(edge), params, iv)))
        cuts = np.unique(cuts)
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            th = a + (b - a) * s
            v = u - script_g(th, params)
            inside = (v > old_lo) & (v < old_hi)
            if not inside.any():
                continue
            f = np.where(inside, old(np.where(inside, v, 0.5 * (old_lo + old_hi))), 0.0)
            total += (b - a) * float(np.sum(ws * f * _angle_measure(th, params.r)))
        out[i] = total
    return out


def _convolution(primes, sigma, r, us, panels, nodes, internal_points):
    ordered = sorted(primes, key=lambda p: -p)
    first = LocalParams(int(ordered[0]), sigma, r)
    iv = value_interval(first)
    lo, hi = iv.lo, iv.hi

    def current(v, prm=first):
        th = _theta_of_u(v, prm, value_interval(prm))
        return _density_from_theta(th, prm)

    for k, p in enumerate(ordered[1:], start=1):
        params = LocalParams(int(p), sigma, r)
        piv = value_interval(params)
        new_lo, new_hi = lo + piv.lo, hi + piv.hi
        if k == len(ordered) - 1:
            return _convolve_step(current, lo, hi, params, us, panels, nodes)
        grid = np.linspace(new_lo, new_hi, internal_points)
        vals = _convolve_step(current, lo, hi, params, grid, panels, nodes)
        spline = CubicSpline(grid, vals, bc_type="natural")

        def current(v, sp=spline):
            return np.maximum(sp(v), 0.0)

        lo, hi = new_lo, new_hi
    inside = (us > lo) & (us <= hi)
    with np.errstate(invalid="ignore"):
        return np.where(inside, current(np.where(inside, us, hi)), 0.0)


def finite_density_convolution(pset: PrimeSet, sigma: float, r: int, u_grid,
                               internal_points: int = 4001) -> DensityGrid:
    """Density of a finite product by iterated convolution of local densities.

    ``err`` is the difference against a run at half the angular resolution
    and half the internal grid, which overstates the error of the returned
    values.
    """
    _validate(sigma, r)
    if len(pset) == 0:
        raise ValidationError("prime set is empty")
    us = np.asarray(u_grid, dtype=float)
    if us.size < 2 or np.any(np.diff(us) <= 0):
        raise ValidationError("u_grid must be strictly ascending with at least two points")
    step = float(np.max(np.diff(us)))
    widths = [value_interval(LocalParams(int(p), sigma, r)).width for p in pset]
    if min(widths) < 4.0 * step:
        raise ValidationError(
            f"u-grid step {step:.3g} does not resolve the narrowest local interval "
            f"(width {min(widths):.3g} < 4 steps)")
    vals = _convolution(pset.members, sigma, r, us, _CONV_PANELS, _CONV_NODES, internal_points)
    if len(pset) == 1:
        err = np.zeros(us.size)
    else:
        rough = _convolution(pset.members, sigma, r, us, _CONV_PANELS // 2, _CONV_NODES // 2,
                             internal_points // 2 + 1)
        err = np.abs(vals - rough)
    mass = _trapezoid_mass(us, vals)
    mass_err = _trapezoid_mass(us, err) + _mass_rule_err(us, vals)
    lo, hi = support_interval(pset, sigma, r)
    return DensityGrid(sigma, r, us, vals, err, mass, mass_err,
                       {"support": (lo, hi), "method": "convolution"})


# --------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True, eq=False)
class MCReport:
    n_samples: int
    x_panel: np.ndarray
    ecf: np.ndarray
    model: np.ndarray
    model_err: np.ndarray
    se: np.ndarray
    mean_u: float
    mean_expected: float
    mean_se: float
    chi2: Optional[float] = None
    chi2_dof: Optional[int] = None
    chi2_pvalue: Optional[float] = None

    @property
    def ecf_z(self) -> np.ndarray:
        return np.abs(self.ecf - self.model) / np.maximum(self.se, 1e-300)

    @property
    def mean_z(self) -> float:
        return abs(self.mean_u - self.mean_expected) / self.mean_se

    def passed(self, k: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.ecf - self.model) <= k * self.se + self.model_err)
                    and abs(self.mean_u - self.mean_expected) <= k * self.mean_se)


def sample_log_values(pset: PrimeSet, sigma: float, r: int, n: int, sampler: STSampler,
                      chunk: int = 1 << 17) -> np.ndarray:
    """``U = sum_p G_p(r theta_p)`` for ``n`` independent Sato-Tate draws per prime."""
    out = np.zeros(n)
    params = [LocalParams(int(p), sigma, r) for p in pset]
    for s in range(0, n, chunk):
        m = min(chunk, n - s)
        theta = st_sample(sampler, (m, len(params)))
        for j, prm in enumerate(params):
            out[s : s + m] += script_g(r * theta[:, j], prm)
    return out


def mc_compare(pset: PrimeSet, sigma: float, r: int, n_samples: int, seed: int,
               x_panel=(0.5, 1.0, 2.0), density: Optional[DensityGrid] = None,
               bins: int = 60, tol: float = 1e-10) -> MCReport:
    _validate(sigma, r)
    if n_samples < 1000:
        raise ValidationError("need at least 1000 samples")
    if len(pset) == 0:
        raise ValidationError("prime set is empty")
    xp = np.asarray(x_panel, dtype=float)
    sample = sample_log_values(pset, sigma, r, int(n_samples), STSampler(seed))
    ecf = np.array([np.mean(np.exp(1j * x * sample)) for x in xp])
    table = finite_transform_table(pset, sigma, r, xp, tol)
    se = np.sqrt(np.maximum(1.0 - np.abs(table.values) ** 2, 0.0) / n_samples)
    mean_exp = float(sum(st_mean_G(LocalParams(int(p), sigma, r)) for p in pset))
    report = dict(n_samples=int(n_samples), x_panel=xp, ecf=ecf, model=table.values,
                  model_err=table.err, se=se, mean_u=float(np.mean(sample)),
                  mean_expected=mean_exp, mean_se=float(np.std(sample) / math.sqrt(n_samples)))
    if density is not None:
        report.update(_histogram_chi2(sample, density, bins))
    return MCReport(**report)


def _histogram_chi2(sample, density: DensityGrid, bins):
    us = density.u_grid
    edges = np.linspace(us[0], us[-1], bins + 1)
    obs, _ = np.histogram(sample, bins=edges)
    fine = np.linspace(us[0], us[-1], 20 * bins + 1)
    dens = np.interp(fine, us, np.maximum(density.values, 0.0)) / SQRT_2PI
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))))
    expected = sample.size * np.diff(np.interp(edges, fine, cum))
    keep = expected >= 5
    stat = float(np.sum((obs[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = int(keep.sum()) - 1
    return {"chi2": stat, "chi2_dof": dof, "chi2_pvalue": float(chi2_dist.sf(stat, dof))}
