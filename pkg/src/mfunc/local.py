"""Single-prime objects: log Euler factors, value interval, local density and
the local Fourier transform evaluated by oscillatory quadrature.

Angles follow the convention ``alpha_f(p) = exp(i theta)``.  For ``r = 2`` the
local transform is the integral of ``exp(i x F(theta))`` against
``(2/pi) sin^2(theta/2) dtheta``, where ``F`` uses ``cos(theta)``; the
equivalent doubled-angle form against the Sato-Tate measure is used only as a
cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ToleranceNotMet, ValidationError
from .primes import is_prime

SQRT_2PI = math.sqrt(2.0 * math.pi)
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class LocalParams:
    p: int
    sigma: float
    r: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValidationError(f"p={self.p} is not prime")
        if not self.sigma > 0.5:
            raise ValidationError(f"sigma must exceed 1/2, got {self.sigma}")
        if self.r not in (1, 2):
            raise ValidationError(f"r must be 1 or 2, got {self.r}")

    @property
    def w(self) -> float:
        """The local parameter p^(-sigma)."""
        return float(self.p) ** (-self.sigma)

    @property
    def delta_even(self) -> int:
        return 1 if self.r % 2 == 0 else 0

    @property
    def diamond(self) -> int:
        """Lag of the main factor: 2 for r = 1, 1 for r = 2."""
        return 2 if self.r == 1 else 1

    @property
    def rho(self) -> int:
        return 0


@dataclass(frozen=True)
class ValueInterval:
    """Half-open interval ``(lo, hi]`` of local values."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, u):
        return (np.asarray(u) > self.lo) & (np.asarray(u) <= self.hi)


def g_local(t, params: LocalParams) -> complex:
    """Principal value of ``-Log(1 - t p^-sigma)`` for ``|t| <= 1``."""
    t = complex(t)
    if abs(t) > 1.0 + 1e-12:
        raise ValidationError(f"|t|={abs(t)} exceeds 1")
    return -np.log1p(-t * params.w)


def _shift(params: LocalParams) -> float:
    return -params.delta_even * math.log1p(-params.w)


def log_factor_modulus(eta, w):
    """``log(1 - 2w cos(eta) + w^2)`` with absolute error ``O(eps * w)``."""
    eta = np.asarray(eta, dtype=float)
    if w < 0.25:
        return np.log1p(w * (w - 2.0 * np.cos(eta)))
    s = np.sin(0.5 * eta)
    return np.log((1.0 - w) ** 2 + 4.0 * w * s * s)


def script_g(eta, params: LocalParams):
    """``-log(1 - 2w cos(eta) + w^2) - delta_even log(1 - w)``, with ``w = p^-sigma``.

    Accepts scalars or arrays.
    """
    val = -log_factor_modulus(eta, params.w) + _shift(params)
    return float(val) if np.ndim(val) == 0 else val


def script_g_max(params: LocalParams) -> float:
    """Pointwise bound on ``|script_g|``."""
    return (2 + params.delta_even) * abs(math.log1p(-params.w))


def value_interval(params: LocalParams) -> ValueInterval:
    w = params.w
    shift = _shift(params)
    return ValueInterval(-2.0 * math.log1p(w) + shift, -2.0 * math.log1p(-w) + shift)


def _theta_of_u(u, params: LocalParams, iv: ValueInterval):
    # 1 - cos(theta) and 1 + cos(theta) from expm1 of the endpoint gaps
    w = params.w
    one_minus_c = (1.0 - w) ** 2 * np.expm1(iv.hi - u) / (2.0 * w)
    one_plus_c = -((1.0 + w) ** 2) * np.expm1(iv.lo - u) / (2.0 * w)
    return 2.0 * np.arctan2(np.sqrt(np.maximum(one_minus_c, 0.0)),
                            np.sqrt(np.maximum(one_plus_c, 0.0)))


def theta_of_u(u, params: LocalParams):
    """Inverse of ``theta -> script_g(theta)`` on ``[0, pi)``.

    ``u`` must lie in ``(lo, hi]``; ``u = hi`` maps to ``theta = 0``.
    """
    iv = value_interval(params)
    ua = np.asarray(u, dtype=float)
    if np.any(ua <= iv.lo):
        raise DomainError(f"u <= lo = {iv.lo!r} (open endpoint of the value interval)", "lo")
    if np.any(ua > iv.hi):
        raise DomainError(f"u > hi = {iv.hi!r} (closed endpoint of the value interval)", "hi")
    th = _theta_of_u(ua, params, iv)
    return float(th) if th.ndim == 0 else th


def _density_from_theta(theta, params: LocalParams):
    w = params.w
    s = np.sin(0.5 * theta)
    modsq = (1.0 - w) ** 2 + 4.0 * w * s * s
    if params.r == 1:
        return SQRT_2PI * modsq * np.sin(theta) / (math.pi * w)
    with np.errstate(divide="ignore"):
        return SQRT_2PI * modsq * np.tan(0.5 * theta) / (2.0 * math.pi * w)


def local_density(u, params: LocalParams):
    """Density of ``script_g`` under ``(2/pi) sin^2(theta/r) dtheta``, so that
    ``int M(u) du / sqrt(2 pi) = 1``.

    Zero outside ``(lo, hi]``.  For ``r = 2`` the density has an integrable
    singularity as ``u -> lo``; if rounding puts ``theta`` exactly at ``pi``
    the result is ``inf`` and a ``RuntimeWarning`` is issued.
    """
    iv = value_interval(params)
    ua = np.asarray(u, dtype=float)
    inside = iv.contains(ua)
    theta = _theta_of_u(np.where(inside, ua, iv.hi), params, iv)
    with np.errstate(invalid="ignore"):
        vals = np.where(inside, _density_from_theta(theta, params), 0.0)
    vals = np.where(inside & (theta >= math.pi), np.inf, vals)
    if np.any(np.isinf(vals)):
        warnings.warn("local density evaluated at its divergent endpoint", RuntimeWarning,
                      stacklevel=2)
    return float(vals) if vals.ndim == 0 else vals


def local_cdf(u, params: LocalParams):
    """Distribution function of the local value, closed form."""
    iv = value_interval(params)
    ua = np.asarray(u, dtype=float)
    theta = _theta_of_u(np.clip(ua, iv.lo, iv.hi), params, iv)
    # mass of (2/pi) sin^2(t/r) dt on [theta, pi]
    if params.r == 1:
        tail = (math.pi - theta + np.sin(theta) * np.cos(theta)) / math.pi
    else:
        tail = (math.pi - theta + np.sin(theta)) / math.pi
    out = np.where(ua <= iv.lo, 0.0, np.where(ua >= iv.hi, 1.0, tail))
    return float(out) if out.ndim == 0 else out


def st_mean_G(params: LocalParams) -> float:
    """Exact Sato-Tate mean of ``script_g`` at the r-fold angle."""
    w = params.w
    if params.r == 1:
        return -0.5 * w * w
    return -math.log1p(-w) - w


# --------------------------------------------------------------------------
# oscillatory quadrature

_GL_POINTS = 16
_PHASE_PER_PANEL = 3.0
_CACHE_PANELS = 1 << 12


def phase_derivative_bound(params: LocalParams) -> float:
    w = params.w
    return 2.0 * w / (1.0 - w) ** 2


def _panel_rule(params: LocalParams, n_panels: int):
    t, wt = np.polynomial.legendre.leggauss(_GL_POINTS)
    h = math.pi / n_panels
    left = np.arange(n_panels) * h
    theta = (left[:, None] + 0.5 * h * (t + 1.0)).ravel()
    if params.r == 1:
        amp = np.sin(theta) ** 2
    else:
        amp = np.sin(0.5 * theta) ** 2
    weights = (2.0 / math.pi) * amp * np.tile(0.5 * h * wt, n_panels)
    return script_g(theta, params), weights


@lru_cache(maxsize=256)
def _cached_rule(params: LocalParams, n_panels: int):
    return _panel_rule(params, n_panels)


def _rule(params, n_panels):
    if n_panels <= _CACHE_PANELS:
        return _cached_rule(params, n_panels)
    return _panel_rule(params, n_panels)


def _apply_rule(xs: np.ndarray, params: LocalParams, n_panels: int) -> np.ndarray:
    phase, weights = _rule(params, n_panels)
    out = np.empty(xs.size, dtype=complex)
    rows = max(1, (1 << 22) // phase.size)
    for i in range(0, xs.size, rows):
        block = xs[i : i + rows]
        out[i : i + rows] = np.exp(1j * np.outer(block, phase)) @ weights
    return out


def initial_panels(x: float, params: LocalParams) -> int:
    need = 4.0 + abs(x) * phase_derivative_bound(params) * math.pi / _PHASE_PER_PANEL
    return 1 << max(2, math.ceil(math.log2(need)))


def quadrature_transform(xs, params: LocalParams, tol: float, max_panels: int = 1 << 20):
    """Vectorised local transform by composite Gauss-Legendre panels.

    The panel count starts from the phase-derivative bound and doubles until
    two successive rules agree to ``tol / 2``.  Returns ``(values, errs,
    converged)``; ``errs`` is the refinement difference plus a rounding floor.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    values = np.empty(xs.size, dtype=complex)
    errs = np.empty(xs.size)
    ok = np.zeros(xs.size, dtype=bool)
    gmax = script_g_max(params)
    floor = 8.0 * EPS * (1.0 + np.abs(xs) * gmax)
    start = np.array([initial_panels(x, params) for x in xs])
    zero = xs == 0.0
    values[zero], errs[zero], ok[zero] = 1.0, 0.0, True
    for n0 in np.unique(start[~zero]):
        idx = np.flatnonzero((start == n0) & ~zero)
        n = max(1, min(int(n0), max_panels // 2))
        coarse = _apply_rule(xs[idx], params, n)
        while idx.size:
            fine = _apply_rule(xs[idx], params, 2 * n)
            change = np.abs(fine - coarse)
            diff = change + floor[idx]
            values[idx], errs[idx] = fine, diff
            done = diff <= 0.5 * tol
            ok[idx[done]] = True
            # refinement below the rounding floor cannot reach tol
            stuck = ~done & (change <= floor[idx])
            n *= 2
            if 2 * n > max_panels:
                break
            keep = ~done & ~stuck
            idx, coarse = idx[keep], fine[keep]
    return values, errs, ok


def local_transform_quadrature(x: float, params: LocalParams, tol: float = 1e-10,
                               max_panels: int = 1 << 20) -> complex:
    """Local Fourier transform ``(2/pi) int_0^pi exp(i x F) sin^2(theta/r) dtheta``.

    Raises :class:`ToleranceNotMet` with the best-effort value when the panel
    budget runs out.
    """
    vals, errs, ok = quadrature_transform([x], params, tol, max_panels)
    if not ok[0]:
        raise ToleranceNotMet(
            f"quadrature at x={x} stopped with error {errs[0]:.3g} > tol={tol}",
            complex(vals[0]), float(errs[0]))
    return complex(vals[0])


def st_side_expectation(psi, params: LocalParams, order: int = 256) -> complex:
    """``int psi(script_g(e^{i r theta})) d^ST theta`` by Gauss-Chebyshev."""
    from .sato_tate import st_quadrature

    rule = st_quadrature(order)
    return rule.integrate(lambda th: psi(script_g(params.r * th, params)))
