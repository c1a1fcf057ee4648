"""Taylor route to the local transform.

The coefficients of ``t -> exp(i x g(t))`` in powers of ``t`` are
``G_a(p, x) = w^a (ix)_a / a!`` with ``w = p^-sigma`` and ``(.)_a`` the rising
factorial.  Pair sums of these coefficients give the local transform without
any oscillatory integral, which makes this module an independent check on
:mod:`mfunc.local`.

Two evaluation paths exist.  Float64 is used whenever the rounding estimate
``O(B eps) * sum |terms|`` fits inside the tolerance; otherwise the
coefficients grow like ``exp(pi |x| / 2)`` before cancelling and the sums are
carried out in mpmath at a precision derived from the same estimate.

Truncation uses exact coefficient magnitudes.  The ratio
``|G_{a+1} / G_a| = w sqrt(x^2 + a^2) / (a + 1)`` decreases up to ``a = x^2``
and then increases towards ``w``, so beyond index ``A`` it never exceeds
``max(ratio(A), w)`` and the tail is dominated by a geometric series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import NumericalError, ToleranceNotMet, ValidationError
from .local import EPS, LocalParams, quadrature_transform

_LOG_TINY = math.log(1e-290)
_LOG_HUGE = 700.0
_MAX_DPS = 4000


def _check_tol(tol):
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")


def _check_w(w):
    # the majorant ratio tends to w; a ratio >= 1 would make every tail infinite
    if not 0.0 < w < 1.0:
        raise NumericalError(f"local parameter w={w} outside (0, 1): coefficient series diverges")


def diamond(r: int) -> int:
    return 2 if r == 1 else 1


# --------------------------------------------------------------------------
# majorant and coefficient tables

def g_majorant(a: int, x_abs: float) -> float:
    """``sum_{n=1}^a x^n/n! * C(a-1, n-1)`` (and 1 at ``a = 0``), in log space."""
    if a < 0 or int(a) != a:
        raise ValidationError(f"a must be a non-negative integer, got {a}")
    if x_abs < 0:
        raise ValidationError("x_abs must be non-negative")
    a = int(a)
    if a == 0:
        return 1.0
    if x_abs == 0:
        return 0.0
    n = np.arange(1, a + 1)
    logs = (n * math.log(x_abs) - gammaln(n + 1)
            + gammaln(a) - gammaln(n) - gammaln(a - n + 1))
    return float(np.exp(logsumexp(logs)))


def majorant_series(w: float, x_abs: float) -> float:
    """``sum_a w^a G_a(x_abs) = exp(x_abs w / (1 - w))``."""
    return math.exp(x_abs * w / (1.0 - w))


def majorant_tail_bound(w: float, x_abs: float, a_max: int) -> float:
    """Bound on ``sum_{a > a_max} w^a G_a(x_abs)``.

    Chernoff form ``(w/v)^(a_max+1) exp(x v/(1-v))`` at the optimal
    ``v in [w, 1)``, capped by the full series.
    """
    _check_w(w)
    k = a_max + 1
    total = x_abs * w / (1.0 - w)
    if x_abs == 0:
        return 0.0
    b = 2.0 * k + x_abs
    # smaller root of k v^2 - b v + k, cancellation-free for tiny x
    v = 2.0 * k / (b + math.sqrt(x_abs * (4.0 * k + x_abs)))
    v = min(max(v, w), 1.0 - 1e-16)
    log_bound = k * math.log(w / v) + x_abs * v / (1.0 - v)
    return math.exp(min(log_bound, total))


@dataclass(frozen=True)
class GCoeffTable:
    params: LocalParams
    x: float
    a_max: int
    coeffs: np.ndarray
    tail_bound: float

    def __getitem__(self, a):
        return self.coeffs[a]


def g_coeff_table(params: LocalParams, x: float, a_max: int) -> GCoeffTable:
    """``G_a(p, x)`` for ``a = 0..a_max`` by the rising-factorial recurrence.

    Entries below ``1e-290`` in modulus end the table early; ``tail_bound``
    always refers to the returned ``a_max``.
    """
    if a_max < 0 or int(a_max) != a_max:
        raise ValidationError(f"a_max must be a non-negative integer, got {a_max}")
    w = params.w
    _check_w(w)
    logs = _log_abs_coeffs(w, np.array([float(x)]), int(a_max))[0]
    if np.any(logs > _LOG_HUGE):
        raise NumericalError(f"G-coefficients overflow float64 at x={x}")
    keep = int(a_max)
    small = np.flatnonzero(logs[1:] < _LOG_TINY)
    if small.size:
        keep = int(small[0])
    a = np.arange(1, keep + 1)
    steps = (1j * x + a - 1) / a * w
    coeffs = np.concatenate(([1.0 + 0j], np.cumprod(steps)))
    coeffs.setflags(write=False)
    return GCoeffTable(params, float(x), keep, coeffs, majorant_tail_bound(w, abs(x), keep))


def _log_abs_coeffs(w: float, xs: np.ndarray, n: int) -> np.ndarray:
    """``log |G_a(w, x)|`` for ``a = 0..n``, one row per ``x``."""
    j = np.arange(n)
    with np.errstate(divide="ignore"):
        steps = np.log(np.hypot(xs[:, None], j[None, :]))
    out = np.zeros((xs.size, n + 1))
    out[:, 1:] = np.cumsum(steps, axis=1) + np.arange(1, n + 1) * math.log(w) - gammaln(
        np.arange(2, n + 2))
    return out


def _log_tails(w: float, xs: np.ndarray, logc: np.ndarray) -> np.ndarray:
    """``log`` of a bound on ``sum_{a > A} |G_a|`` for ``A = 0..n-1``."""
    n = logc.shape[1] - 1
    a = np.arange(1, n + 1)
    ratio = np.maximum(w * np.hypot(xs[:, None], a[None, :]) / (a + 1.0), w)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = logc[:, 1:] - np.log1p(-ratio)
    return np.where(ratio < 1.0, out, np.inf)


def _truncation(w: float, xs: np.ndarray, nus, log_tau: float, n0: int = 32):
    """Smallest common cut ``B`` per ``x`` so that every lag's pair tail is below
    ``exp(log_tau)``.  Returns ``(B, logc, logt)``."""
    nmax = max(nus)
    n = max(n0, int(4 + 2.0 * w * np.max(np.abs(xs), initial=0.0) / (1.0 - w)))
    while True:
        logc = _log_abs_coeffs(w, xs, n)
        logt = _log_tails(w, xs, logc)
        m = n - nmax
        cut = np.zeros(xs.size, dtype=int)
        good = np.ones(xs.size, dtype=bool)
        for nu in nus:
            pt = logt[:, :m] + logt[:, nu : nu + m]
            ok = pt <= log_tau
            good &= ok.any(axis=1)
            cut = np.maximum(cut, np.argmax(ok, axis=1))
        if good.all():
            return cut, logc, logt
        n *= 2
        if n > 1 << 17:
            raise NumericalError("coefficient series did not reach its tolerance")


# --------------------------------------------------------------------------
# float path, vectorised over x

def series_transform(xs, params: LocalParams, tol: float):
    """Series route for one prime over many ``x`` in float64.

    Returns ``(values, errs, ok)``; ``ok`` is False where the rounding
    estimate exceeds ``tol / 4`` or the coefficients overflow, in which case
    the value must be recomputed by another route.
    """
    _check_tol(tol)
    w = params.w
    _check_w(w)
    dia = params.diamond
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    values = np.ones(xs.size, dtype=complex)
    errs = np.zeros(xs.size)
    oks = np.ones(xs.size, dtype=bool)
    rows = 256
    for s in range(0, xs.size, rows):
        sl = slice(s, s + rows)
        with np.errstate(over="ignore", invalid="ignore"):
            v, e, k = _series_block(xs[sl], w, dia, tol)
        values[sl], errs[sl], oks[sl] = v, e, k
    if params.delta_even:
        values *= np.exp(-1j * xs * math.log1p(-w))
    return values, errs, oks


def _series_block(xs, w, dia, tol):
    # each pair sum gets tol/2; truncation takes half of that
    cut, logc, logt = _truncation(w, xs, (0, dia), math.log(tol / 4.0))
    n = logc.shape[1] - 1
    bmax = int(cut.max())
    big = logc[:, : bmax + dia + 1].max(axis=1) > _LOG_HUGE
    a = np.arange(1, bmax + dia + 1)
    safe_x = np.where(big, 0.0, xs)
    steps = (1j * safe_x[:, None] + a[None, :] - 1) / a[None, :] * w
    c = np.concatenate((np.ones((xs.size, 1), dtype=complex), np.cumprod(steps, axis=1)), axis=1)
    b = np.arange(bmax + 1)
    mask = b[None, :] <= cut[:, None]
    c0 = c[:, : bmax + 1]
    cd = c[:, dia : dia + bmax + 1]
    main = np.sum(np.where(mask, c0 * c0 - cd * c0, 0.0), axis=1)
    mag = np.exp(np.minimum(logc, _LOG_HUGE))
    m0 = mag[:, : bmax + 1]
    md = mag[:, dia : dia + bmax + 1]
    absum = np.sum(np.where(mask, m0 * (m0 + md), 0.0), axis=1)
    rounding = (4.0 * cut + 8.0) * EPS * absum
    rows = np.arange(xs.size)
    trunc = (np.exp(logt[rows, cut] + logt[rows, np.minimum(cut, n - 1)])
             + np.exp(logt[rows, cut] + logt[rows, np.minimum(cut + dia, n - 1)]))
    errs = trunc + rounding
    ok = (~big) & (rounding <= 0.25 * tol) & np.isfinite(main)
    return np.where(ok, main, np.nan), errs, ok


# --------------------------------------------------------------------------
# arbitrary-precision path, scalar

def _mp_pair_sums(w: float, x: float, nus, tol: float):
    """Pair sums for the given lags in mpmath; returns (values, trunc_err)."""
    xs = np.array([float(x)])
    cut, logc, logt = _truncation(w, xs, tuple(nus), math.log(tol / 4.0))
    B = int(cut[0])
    top = B + max(nus)
    peak = float(np.max(logc[0, : top + 1]))
    dps = int(math.ceil((2.0 * peak - math.log(tol)) / math.log(10.0))) + 15
    if dps > _MAX_DPS:
        raise ToleranceNotMet(
            f"series route at x={x} needs {dps} digits; use the quadrature route",
            complex("nan"), math.inf)
    n = logc.shape[1] - 1
    with mpmath.workdps(max(dps, 20)):
        wm = mpmath.mpf(w)
        ix = mpmath.mpc(0, x)
        c = [mpmath.mpc(1)]
        for a in range(1, top + 1):
            c.append(c[-1] * (ix + a - 1) / a * wm)
        sums = [mpmath.fsum(c[b + nu] * c[b] for b in range(B + 1)) for nu in nus]
        out = [complex(s) for s in sums]
    trunc = [float(np.exp(logt[0, B] + logt[0, min(B + nu, n - 1)])) for nu in nus]
    return out, trunc


def _scalar_pair_sums(params: LocalParams, x: float, nus, tol: float):
    w = params.w
    _check_w(w)
    if x == 0:
        return [1.0 + 0j if nu == 0 else 0j for nu in nus], [0.0] * len(nus)
    vals, trunc = _mp_pair_sums(w, float(x), nus, tol)
    # mp rounding is ~10^-15 tol, below what float reporting can resolve
    return vals, [t + 1e-3 * tol for t in trunc]


def g_pair_sum(nu: int, params: LocalParams, x: float, tol: float) -> complex:
    """``sum_{b >= 0} G_{b+nu}(p, x) G_b(p, x)``, complex products throughout."""
    _check_tol(tol)
    if nu < 0 or int(nu) != nu:
        raise ValidationError(f"lag must be a non-negative integer, got {nu}")
    vals, _ = _scalar_pair_sums(params, x, (int(nu),), tol)
    return vals[0]


def main_factor(params: LocalParams, x: float, tol: float) -> complex:
    """``G_{p,x}(0) - G_{p,x}(diamond)``, each pair sum to ``tol / 2``."""
    _check_tol(tol)
    if x == 0:
        return 1.0 + 0j
    f = series_transform([x], params, tol)
    if f[2][0]:
        return complex(f[0][0] / unit_factor(params, x))
    vals, _ = _scalar_pair_sums(params, x, (0, params.diamond), tol / 2.0)
    return vals[0] - vals[1]


def unit_factor(params: LocalParams, x: float) -> complex:
    """Contribution of the ``delta_even`` term: ``(1 - w)^(-i x)`` for r = 2."""
    if not params.delta_even:
        return 1.0 + 0j
    return complex(np.exp(-1j * x * math.log1p(-params.w)))


def series_value(params: LocalParams, x: float, tol: float):
    """``(value, err)`` of the series route at one point, float or mpmath."""
    _check_tol(tol)
    if x == 0:
        return 1.0 + 0j, 0.0
    v, e, ok = series_transform([x], params, tol)
    if ok[0]:
        return complex(v[0]), float(e[0])
    vals, errs = _scalar_pair_sums(params, x, (0, params.diamond), tol / 2.0)
    return unit_factor(params, x) * (vals[0] - vals[1]), errs[0] + errs[1]


def local_transform_series(params: LocalParams, x: float, tol: float) -> complex:
    """Local transform as ``unit_factor * main_factor``, error at most ``tol``."""
    return series_value(params, x, tol)[0]


def local_transform(xs, params: LocalParams, tol: float):
    """Preferred evaluator: float series where well conditioned, otherwise
    oscillatory quadrature.  Returns ``(values, errs, ok)``."""
    values, errs, ok = series_transform(xs, params, tol)
    bad = np.flatnonzero(~ok)
    if bad.size:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        qv, qe, qok = quadrature_transform(xs[bad], params, tol)
        values[bad], errs[bad], ok[bad] = qv, qe, qok
    return values, errs, ok


# --------------------------------------------------------------------------
# many primes at one x

def block_product(ws: np.ndarray, x: float, r: int, tol_each: float):
    """Product of local transforms over primes with parameters ``ws`` at one ``x``.

    The coefficients scale as ``w^a`` times a function of ``x`` alone, so the
    main factor of every prime is one polynomial in ``w / max(ws)``.  Returns
    ``(product, err_sum, ok)`` where ``err_sum`` adds per-factor errors;
    ``ok`` is False when float64 cannot certify ``tol_each`` per factor.
    """
    ws = np.asarray(ws, dtype=float)
    if ws.size == 0 or x == 0:
        return 1.0 + 0j, 0.0, True
    wmax = float(ws.max())
    _check_w(wmax)
    dia = diamond(r)
    xs = np.array([float(x)])
    cut, logc, logt = _truncation(wmax, xs, (0, dia), math.log(tol_each / 4.0))
    B = int(cut[0])
    if logc[0, : B + dia + 1].max() > _LOG_HUGE:
        return complex("nan"), math.inf, False
    a = np.arange(1, B + dia + 1)
    c = np.concatenate(([1.0 + 0j], np.cumprod((1j * x + a - 1) / a * wmax)))
    poly = np.zeros(2 * B + dia + 1, dtype=complex)
    poly[0 : 2 * B + 1 : 2] += c[: B + 1] ** 2
    poly[dia : 2 * B + dia + 1 : 2] -= c[dia : B + dia + 1] * c[: B + 1]
    mag = np.abs(c)
    absp = np.zeros(poly.size)
    absp[0 : 2 * B + 1 : 2] += mag[: B + 1] ** 2
    absp[dia : 2 * B + dia + 1 : 2] += mag[dia : B + dia + 1] * mag[: B + 1]
    t = ws / wmax
    main = np.polynomial.polynomial.polyval(t, poly)
    rounding = (4.0 * B + 16.0) * EPS * np.polynomial.polynomial.polyval(t, absp)
    # tails at w scale from wmax by t^(A+1) with a ratio bound no larger than at wmax
    n = logc.shape[1] - 1

    def tail(A):
        return np.exp(logt[0, min(A, n - 1)]) * t ** (A + 1)

    trunc = tail(B) * (tail(B) + tail(B + dia))
    err = float(np.sum(rounding + trunc))
    ok = bool(np.all(rounding <= 0.25 * tol_each))
    prod = complex(np.prod(main))
    if r == 2:
        prod *= complex(np.exp(-1j * x * np.sum(np.log1p(-ws))))
    return prod, err, ok
