"""Invariant suite behind ``mfunc verify``.

Each check returns ``(passed, detail)``; an exception inside a check counts as
a failure and its message becomes the detail.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import ValidationError
from .gseries import (g_coeff_table, g_majorant, g_pair_sum, local_transform, series_value)
from .local import (LocalParams, local_density, quadrature_transform, script_g, st_mean_G,
                    st_side_expectation, theta_of_u, value_interval)
from .mfunction import (LimitMarker, fit_decay_exponent, finite_density_convolution,
                        finite_transform_table, invert_density, limit_transform_table,
                        support_interval)
from .newforms import (euler_product, hecke_lambda, log_L_values, empirical_average,
                       synthetic_batch)
from .primes import PrimeSet, is_prime, prime_set, primes_up_to
from .sato_tate import STSampler, st_cdf, st_quadrature, st_sample

SQRT_2PI = math.sqrt(2.0 * math.pi)

# max of |M~_p(x)| sqrt(1+|x|) / p^sigma over x in {1,..,1e4}, p in {5,11,101},
# sigma in {0.6,1,2}; quadrature at tol 1e-10
DECAY_BASELINE = {1: 0.5028275886603091, 2: 0.5131211496809569}


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _fmt(v) -> str:
    return f"{v:.3g}"


class Suite:
    def __init__(self, sigma: float, r: int, seed: int = 20240601):
        if not sigma > 0.5:
            raise ValueError("sigma must exceed 1/2")
        self.sigma, self.r, self.seed = float(sigma), int(r), seed
        self.rng = np.random.default_rng(seed)
        self.small = (2, 3, 5, 7)

    def params(self, p):
        return LocalParams(p, self.sigma, self.r)

    # -- primes ---------------------------------------------------------------
    def primes_nested(self):
        ys = np.sort(self.rng.uniform(2, 5000, size=20))
        sets = [set(prime_set(7, y).members) for y in ys]
        ok = all(a <= b for a, b in zip(sets, sets[1:]))
        return ok, f"{len(sets)} nested cutoffs"

    def primes_count(self):
        y = 20000
        oracle = sum(1 for n in range(2, y + 1) if is_prime(n))
        got = len(prime_set(None, y))
        return got == oracle, f"pi({y}) = {got}, trial division {oracle}"

    # -- sato_tate ------------------------------------------------------------
    def st_weights(self):
        rule = st_quadrature(24)
        s = float(np.sum(rule.weights))
        ok = abs(s - 1) <= 1e-12 and rule.nodes.min() >= 0 and rule.nodes.max() <= math.pi
        return ok, f"sum of weights - 1 = {_fmt(s - 1)}"

    def st_moments(self):
        n = 16
        rule = st_quadrature(n)
        worst = 0.0
        for k in range(0, 2 * n - 1):
            target = 1.0 if k == 0 else (-0.5 if k == 2 else 0.0)
            worst = max(worst, abs(rule.integrate(lambda t: np.cos(k * t)) - target))
        return worst <= 1e-10, f"max moment error {_fmt(worst)} for k <= {2 * n - 2}"

    def st_cdf_monotone(self):
        th = np.linspace(0, math.pi, 2001)
        vals = np.array([st_cdf(t) for t in th])
        return bool(np.all(np.diff(vals) > 0)), "strictly increasing on 2001 points"

    def st_determinism(self):
        a = st_sample(STSampler(self.seed), 1000)
        b = st_sample(STSampler(self.seed), 1000)
        return bool(np.array_equal(a, b)), "equal seeds give equal streams"

    # -- local ----------------------------------------------------------------
    def local_change_of_variables(self):
        psis = {"1": lambda u: np.ones_like(u), "u": lambda u: u, "u^2": lambda u: u * u,
                "cos": np.cos, "sin": np.sin}
        worst = 0.0
        for p in self.small:
            prm = self.params(p)
            iv = value_interval(prm)
            for psi in psis.values():
                lhs = quad(lambda u: psi(u) * local_density(u, prm), iv.lo, iv.hi,
                           limit=400, epsabs=1e-14, epsrel=1e-13)[0] / SQRT_2PI
                rhs = st_side_expectation(psi, prm, order=400)
                worst = max(worst, abs(lhs - rhs))
        return worst <= 1e-8, f"max deviation {_fmt(worst)}"

    def local_modulus(self):
        xs = np.array([0, 0.5, 2, 10, 50, 100, 1000])
        worst = 0.0
        for p in self.small + (101,):
            v, e, _ = quadrature_transform(xs, self.params(p), 1e-10)
            worst = max(worst, float(np.max(np.abs(v))))
        return worst <= 1 + 1e-9, f"max |M~_p| = {worst:.12f}"

    def local_conjugate(self):
        xs = np.array([0.5, 3.0, 17.0])
        worst = 0.0
        for p in self.small:
            prm = self.params(p)
            a, _, _ = quadrature_transform(xs, prm, 1e-11)
            b, _, _ = quadrature_transform(-xs, prm, 1e-11)
            worst = max(worst, float(np.max(np.abs(a - np.conj(b)))))
        return worst <= 1e-10, f"max |M~(-x) - conj M~(x)| = {_fmt(worst)}"

    def local_round_trip(self):
        th = np.linspace(0.01, math.pi - 0.01, 4001)
        worst = 0.0
        for p in self.small:
            prm = self.params(p)
            worst = max(worst, float(np.max(np.abs(theta_of_u(script_g(th, prm), prm) - th))))
        return worst <= 1e-12, f"max |theta(u(theta)) - theta| = {_fmt(worst)} on [0.01, pi-0.01]"

    def local_decay(self):
        xs = np.array([1, 10, 1e2, 1e3, 1e4])
        worst = 0.0
        for p in (5, 11, 101):
            for s in (0.6, 1.0, 2.0):
                v, _, _ = quadrature_transform(xs, LocalParams(p, s, self.r), 1e-10)
                worst = max(worst, float(np.max(np.abs(v) * np.sqrt(1 + xs) / p ** s)))
        base = DECAY_BASELINE[self.r]
        return worst <= base * (1 + 1e-6), f"max ratio {worst:.6f}, baseline {base:.6f}"

    def local_means(self):
        worst = 0.0
        for p in self.small + (17,):
            prm = self.params(p)
            worst = max(worst, abs(st_side_expectation(lambda g: g, prm, 256) - st_mean_G(prm)))
        return worst <= 1e-10, f"max |quadrature - closed form| = {_fmt(worst)}"

    # -- gseries --------------------------------------------------------------
    def g_rising_factorial(self):
        import mpmath

        worst = 0.0
        for p in (2, 5):
            for x in (0.5, 2.0, -3.0):
                prm = self.params(p)
                tab = g_coeff_table(prm, x, 30)
                for a in range(tab.a_max + 1):
                    exact = complex(mpmath.rf(mpmath.mpc(0, x), a) / mpmath.factorial(a)
                                    * mpmath.mpf(prm.w) ** a)
                    worst = max(worst, abs(tab.coeffs[a] - exact) / abs(exact))
        return worst <= 1e-12, f"max relative error {_fmt(worst)} for a <= 30"

    def g_majorant_domination(self):
        bad = 0
        for p in (2, 3, 11):
            for x in (0.3, 2.0, -7.0, 40.0):
                prm = self.params(p)
                tab = g_coeff_table(prm, x, 30)
                for a in range(tab.a_max + 1):
                    if abs(tab.coeffs[a]) > prm.w ** a * g_majorant(a, abs(x)) * (1 + 1e-12):
                        bad += 1
        return bad == 0, f"{bad} violations"

    def g_one_minus(self):
        worst = -math.inf
        for p in self.small + (31,):
            prm = self.params(p)
            gmax = (2 + prm.delta_even) * abs(math.log1p(-prm.w))
            for x in (0.1, 0.7, 3.0, 12.0):
                v, e = series_value(prm, x, 1e-12)
                bound = abs(x) * abs(st_mean_G(prm)) + 0.5 * x * x * gmax ** 2
                worst = max(worst, abs(v - 1) - bound - e)
        return worst <= 0, f"max excess over bound {_fmt(worst)}"

    def g_conjugate(self):
        worst = 0.0
        for p in (2, 7):
            prm = self.params(p)
            for x in (0.4, 5.0):
                for nu in (0, 1, 2):
                    worst = max(worst, abs(g_pair_sum(nu, prm, -x, 1e-13)
                                           - np.conj(g_pair_sum(nu, prm, x, 1e-13))))
                worst = max(worst, abs(series_value(prm, -x, 1e-12)[0]
                                       - np.conj(series_value(prm, x, 1e-12)[0])))
        return worst <= 1e-11, f"max conjugation defect {_fmt(worst)}"

    def g_dual_route(self):
        xs = np.array([0, 0.5, -0.5, 2, -2, 10, -10, 50])
        worst = 0.0
        for p in (2, 5, 101):
            prm = self.params(p)
            q, _, _ = quadrature_transform(xs, prm, 1e-11)
            s = np.array([series_value(prm, x, 1e-11)[0] for x in xs])
            worst = max(worst, float(np.max(np.abs(q - s))))
        return worst <= 1e-8, f"max |quadrature - series| = {_fmt(worst)}"

    # -- global ---------------------------------------------------------------
    def global_monotone(self):
        xs = np.array([0.3, 1.0, 2.5, 7.0, 20.0])
        pool = primes_up_to(60)
        bad = 0
        for _ in range(6):
            big = sorted(self.rng.choice(pool, size=6, replace=False).tolist())
            sub = big[: self.rng.integers(1, 6)]
            a = finite_transform_table(PrimeSet.from_primes(big), self.sigma, self.r, xs, 1e-12)
            b = finite_transform_table(PrimeSet.from_primes(sub), self.sigma, self.r, xs, 1e-12)
            bad += int(np.sum(np.abs(a.values) > np.abs(b.values) + 1e-12))
        return bad == 0, f"{bad} violations over 6 nested pairs x 5 points"

    def global_limit_modulus(self):
        xs = np.array([0.0, 0.5, 2.0, 8.0])
        t = limit_transform_table(None, self.sigma, self.r, xs, 1e-6)
        ok = bool(np.all(np.abs(t.values) <= 1 + t.err)) and abs(t.values[0] - 1) <= t.err[0] + 1e-15
        return ok, f"max |M~| = {np.max(np.abs(t.values)):.9f}, max err {_fmt(t.err.max())}"

    def global_route_equivalence(self):
        pset = PrimeSet.from_primes([2, 3, 5])
        lo, hi = support_interval(pset, self.sigma, self.r)
        us = np.linspace(lo - 0.05, hi + 0.05, 301)
        conv = finite_density_convolution(pset, self.sigma, self.r, us)
        inv = invert_density(pset, self.sigma, self.r, us, x_max=200, x_step=0.05, tol=1e-10)
        gap = float(np.max(np.abs(conv.values - inv.values) - conv.err - inv.err))
        mass_ok = abs(inv.mass - 1) <= inv.mass_err + 1e-6 and abs(conv.mass - 1) <= conv.mass_err + 1e-6
        nonneg = bool(np.all(inv.values >= -inv.err))
        return gap <= 0 and mass_ok and nonneg, (
            f"max excess {_fmt(gap)}, masses {conv.mass:.8f} / {inv.mass:.8f}")

    def global_support(self):
        if not self.sigma > 1:
            return True, "not applicable for sigma <= 1"
        lo, hi = support_interval(LimitMarker(None), self.sigma, self.r)
        us = np.linspace(lo - 2.0, hi + 2.0, 801)
        d = invert_density(None, self.sigma, self.r, us, x_max=200, x_step=0.05, tol=1e-8)
        out = (us < lo) | (us > hi)
        outside = float(np.trapezoid(np.where(out, np.abs(d.values), 0.0), us) / SQRT_2PI)
        allowed = float(np.trapezoid(np.where(out, d.err, 0.0), us) / SQRT_2PI)
        return outside <= allowed + 1e-9, f"mass outside support {_fmt(outside)} vs error {_fmt(allowed)}"

    def global_decay(self):
        pset = PrimeSet.from_primes(prime_set(None, 5).members)
        xs = np.geomspace(100, 1e4, 60)
        t = finite_transform_table(pset, self.sigma, self.r, xs, 1e-10)
        fit = fit_decay_exponent(xs, t.values, bins=12)
        return fit.exponent >= 1.4, f"fitted exponent {fit.exponent:.3f} with primes {{2,3,5}}"

    # -- newforms -------------------------------------------------------------
    def _batch(self):
        primes = primes_up_to(60)
        return synthetic_batch(61, 1, 4, 200, primes, self.seed), prime_set(61, 60)

    def nf_support(self):
        batch, pset = self._batch()
        vals = log_L_values(batch.forms, pset, self.sigma, self.r)
        lo, hi = support_interval(pset, self.sigma, self.r)
        ok = bool(np.all((vals >= lo - 1e-12) & (vals <= hi + 1e-12)))
        return ok, f"{len(vals)} values in [{lo:.4f}, {hi:.4f}]"

    def nf_euler(self):
        batch, pset = self._batch()
        vals = log_L_values(batch.forms, pset, self.sigma, 1)
        worst = max(abs(math.exp(v) / euler_product(f, pset, self.sigma) - 1)
                    for v, f in zip(vals, batch.forms))
        return worst <= 1e-12, f"max relative error {_fmt(worst)}"

    def nf_average(self):
        batch, pset = self._batch()
        worst = 0.0
        for x in (0.5, 2.0, 9.0):
            avg, mass = empirical_average(batch, x, pset, self.sigma, self.r)
            worst = max(worst, abs(avg) - mass)
        return worst <= 1e-12 and abs(mass - 1) <= 1e-12, f"mass {mass:.15f}"

    def nf_hecke(self):
        batch, _ = self._batch()
        worst = 0.0
        for f in batch.forms[:50]:
            for p in (2, 3, 5, 11):
                worst = max(worst, abs(hecke_lambda(f, p) * hecke_lambda(f, p * p)
                                       - hecke_lambda(f, p ** 3) - hecke_lambda(f, p)))
        return worst <= 1e-12, f"max defect {_fmt(worst)}"

    # -- cli ------------------------------------------------------------------
    def cli_deterministic(self):
        from .cli import run

        argv = ["local-transform", "--p", "3", "--sigma", str(self.sigma), "--r", str(self.r),
                "--x", "0", "1.5", "-4"]
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            code = run(argv, stdout=buf)
            outs.append((code, buf.getvalue()))
        return outs[0] == outs[1] and outs[0][0] == 0, f"{len(outs[0][1])} bytes, identical"

    def cli_header(self):
        from .cli import run
        from .io import TRANSFORM_COLUMNS

        buf = io.StringIO()
        run(["global-transform", "--sigma", str(self.sigma), "--r", str(self.r), "--y", "10",
             "--x", "0", "1"], stdout=buf)
        header = [l for l in buf.getvalue().splitlines() if not l.startswith("#")][0]
        return header == ",".join(TRANSFORM_COLUMNS), f"header '{header}'"

    def checks(self) -> List[Tuple[str, Callable]]:
        names = ["primes_nested", "primes_count", "st_weights", "st_moments", "st_cdf_monotone",
                 "st_determinism", "local_change_of_variables", "local_modulus", "local_conjugate",
                 "local_round_trip", "local_decay", "local_means", "g_rising_factorial",
                 "g_majorant_domination", "g_one_minus", "g_conjugate", "g_dual_route",
                 "global_monotone", "global_limit_modulus", "global_route_equivalence",
                 "global_support", "global_decay", "nf_support", "nf_euler", "nf_average",
                 "nf_hecke", "cli_deterministic", "cli_header"]
        return [(n, getattr(self, n)) for n in names]


def run_suite(sigma: float, r: int, seed: int = 20240601, only=None) -> List[Check]:
    suite = Suite(sigma, r, seed)
    known = [n for n, _ in suite.checks()]
    unknown = sorted(set(only or ()) - set(known))
    if unknown:
        raise ValidationError(f"unknown check(s) {', '.join(unknown)}; known: {', '.join(known)}")
    out = []
    for name, fn in suite.checks():
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail, time.perf_counter() - t0))
    return out
