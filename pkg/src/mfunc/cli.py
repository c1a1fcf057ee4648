"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 numerical failure, 3 data error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from contextlib import contextmanager
from typing import IO, List, Optional

import numpy as np

from . import __version__
from .errors import DataError, NumericalError, ValidationError
from .gseries import local_transform, series_value
from .io import DENSITY_COLUMNS, TRANSFORM_COLUMNS, emit
from .local import LocalParams, quadrature_transform
from .mfunction import (LimitMarker, finite_density_convolution, invert_density, mc_compare,
                        transform_table)
from .newforms import empirical_average, parse_newforms, petersson_check, s_r_sum
from .primes import PrimeSet, prime_set

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_DATA = 0, 1, 2, 3
COMMANDS = ("local-transform", "global-transform", "density", "convolve", "verify",
            "mc-compare", "empirical", "s-r-sum")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, sigma_required=True):
    p.add_argument("--sigma", type=float, required=sigma_required)
    p.add_argument("--r", type=int, default=1, choices=(1, 2))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))


def _primes_args(p, limit_allowed: bool):
    p.add_argument("--q", type=int, default=None, help="excluded level prime")
    p.add_argument("--y", type=float, default=None,
                   help="use primes up to y" + (" (default: the limit over all primes)"
                                               if limit_allowed else ""))
    p.add_argument("--primes", type=int, nargs="+", default=None, help="explicit prime set")


def _x_args(p):
    p.add_argument("--x", type=float, nargs="+", default=None, help="explicit x values")
    p.add_argument("--x-min", type=float, default=0.0)
    p.add_argument("--x-max", type=float, default=200.0)
    p.add_argument("--x-step", type=float, default=0.05)


def _u_args(p, required=True):
    p.add_argument("--u-min", type=float, required=required)
    p.add_argument("--u-max", type=float, required=required)
    p.add_argument("--u-points", type=int, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfunc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("local-transform", help="transform of one local factor")
    _common(p)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--method", default="auto", choices=("auto", "quadrature", "series"))
    _x_args(p)

    p = sub.add_parser("global-transform", help="product over primes or its limit")
    _common(p)
    _primes_args(p, True)
    p.add_argument("--y-max", type=float, default=1e6)
    _x_args(p)

    p = sub.add_parser("density", help="density by Fourier inversion")
    _common(p)
    _primes_args(p, True)
    p.add_argument("--y-max", type=float, default=1e6)
    p.add_argument("--x-max", type=float, default=200.0)
    p.add_argument("--x-step", type=float, default=0.05)
    _u_args(p)

    p = sub.add_parser("convolve", help="finite-set density by iterated convolution")
    _common(p)
    _primes_args(p, False)
    _u_args(p)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--r", type=int, default=1, choices=(1, 2))
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--only", nargs="+", default=None, help="run only the named checks")

    p = sub.add_parser("mc-compare", help="Monte Carlo check of a finite product")
    _common(p)
    _primes_args(p, False)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x", type=float, nargs="+", default=[0.5, 1.0, 2.0])

    p = sub.add_parser("empirical", help="weighted averages over ingested newforms")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--x", type=float, nargs="+", default=[0.5, 1.0, 2.0])

    p = sub.add_parser("s-r-sum", help="damped eigenvalue sums per form")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--y-lo", type=float, default=None)
    return parser


def _config(args) -> dict:
    # the destination is not a parameter of the result
    return {k: v for k, v in sorted(vars(args).items()) if k != "out"}


def _check_common(args):
    if getattr(args, "sigma", None) is not None and not args.sigma > 0.5:
        raise UsageError(f"--sigma must exceed 0.5 (got {args.sigma})")
    if hasattr(args, "tol") and not args.tol > 0:
        raise UsageError(f"--tol must be positive (got {args.tol})")


def _target(args, limit_allowed: bool):
    given = [n for n in ("y", "primes") if getattr(args, n) is not None]
    if len(given) > 1:
        raise UsageError("--y and --primes are mutually exclusive")
    if args.primes is not None:
        if args.q is not None and args.q in args.primes:
            raise UsageError(f"--primes contains the excluded level --q {args.q}")
        return PrimeSet.from_primes(args.primes, args.q)
    if args.y is not None:
        pset = prime_set(args.q, args.y)
        if len(pset) == 0:
            raise UsageError(f"no primes up to --y {args.y}")
        return pset
    if not limit_allowed:
        raise UsageError("this command needs a finite prime set: give --y or --primes")
    return LimitMarker(args.q)


def _x_values(args) -> np.ndarray:
    if args.x is not None:
        return np.asarray(args.x, dtype=float)
    if not args.x_step > 0 or args.x_max < args.x_min:
        raise UsageError("need --x-step > 0 and --x-max >= --x-min")
    n = int(math.floor((args.x_max - args.x_min) / args.x_step + 1e-9))
    return args.x_min + np.arange(n + 1) * args.x_step


def _u_values(args) -> np.ndarray:
    if args.u_points < 2 or not args.u_max > args.u_min:
        raise UsageError("need --u-points >= 2 and --u-max > --u-min")
    return np.linspace(args.u_min, args.u_max, args.u_points)


@contextmanager
def _sink(path: Optional[str], stdout: IO[str]):
    if path is None:
        yield stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _cmd_local(args, out):
    params = LocalParams(args.p, args.sigma, args.r)
    xs = _x_values(args)
    if args.method == "quadrature":
        vals, errs, ok = quadrature_transform(xs, params, args.tol)
    elif args.method == "series":
        pairs = [series_value(params, float(x), args.tol) for x in xs]
        vals = np.array([v for v, _ in pairs], dtype=complex)
        errs = np.array([e for _, e in pairs])
        ok = errs <= args.tol
    else:
        vals, errs, ok = local_transform(xs, params, args.tol)
    if not ok.all():
        raise NumericalError(f"tolerance {args.tol:g} not met at {int((~ok).sum())} points")
    emit(out, args.format, TRANSFORM_COLUMNS, (xs, vals.real, vals.imag, errs), _config(args))
    return EXIT_OK


def _cmd_global(args, out):
    target = _target(args, True)
    xs = _x_values(args)
    t = transform_table(target, args.sigma, args.r, xs, args.tol, args.y_max)
    notes = {"converged": bool(t.converged.all())}
    if t.cutoff is not None:
        notes["max_cutoff"] = float(t.cutoff.max())
    emit(out, args.format, TRANSFORM_COLUMNS, (xs, t.values.real, t.values.imag, t.err),
         _config(args), notes)
    return EXIT_OK if t.converged.all() else EXIT_NUMERICAL


def _density_notes(d):
    notes = {"mass": d.mass, "mass_err": d.mass_err}
    notes.update({k: v for k, v in d.meta.items() if k != "support"})
    return notes


def _cmd_density(args, out):
    target = _target(args, True)
    d = invert_density(target, args.sigma, args.r, _u_values(args), args.x_max, args.x_step,
                       args.tol, args.y_max)
    emit(out, args.format, DENSITY_COLUMNS, (d.u_grid, d.values, d.err), _config(args),
         _density_notes(d))
    return EXIT_OK


def _cmd_convolve(args, out):
    target = _target(args, False)
    d = finite_density_convolution(target, args.sigma, args.r, _u_values(args))
    emit(out, args.format, DENSITY_COLUMNS, (d.u_grid, d.values, d.err), _config(args),
         _density_notes(d))
    return EXIT_OK


def _cmd_verify(args, out):
    from .verify import run_suite

    if not args.sigma > 0.5:
        raise UsageError(f"--sigma must exceed 0.5 (got {args.sigma})")
    checks = run_suite(args.sigma, args.r, args.seed, args.only)
    for c in checks:
        out.write(c.line() + "\n")
    failed = sum(not c.passed for c in checks)
    out.write(f"{len(checks) - failed}/{len(checks)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def _cmd_mc(args, out):
    target = _target(args, False)
    rep = mc_compare(target, args.sigma, args.r, args.samples, args.seed, args.x, tol=args.tol)
    cols = ("x", "ecf_re", "ecf_im", "model_re", "model_im", "se")
    notes = {"mean_u": rep.mean_u, "mean_expected": rep.mean_expected, "mean_se": rep.mean_se,
             "passed_4se": rep.passed(4.0)}
    emit(out, args.format, cols, (rep.x_panel, rep.ecf.real, rep.ecf.imag, rep.model.real,
                                  rep.model.imag, rep.se), _config(args), notes)
    return EXIT_OK


def _cmd_empirical(args, out):
    batches = parse_newforms(args.input)
    if not batches:
        raise DataError(f"no records in {args.input}")
    rows = {k: [] for k in ("q", "m", "k", "forms", "x", "re", "im", "mass", "petersson_n1")}
    for b in batches:
        pset = prime_set(b.q, args.y)
        n1 = petersson_check(b, 1)["sum"]
        for x in args.x:
            avg, mass = empirical_average(b, x, pset, args.sigma, args.r)
            for key, val in zip(rows, (b.q, b.m, b.k, len(b), x, avg.real, avg.imag, mass, n1)):
                rows[key].append(val)
    warn = sorted({w for b in batches for f in b.forms for w in f.warnings})
    emit(out, args.format, tuple(rows), tuple(rows.values()), _config(args), {"warnings": warn})
    return EXIT_OK


def _cmd_srsum(args, out):
    batches = parse_newforms(args.input)
    cols = ("q", "m", "k", "index", "s_r")
    rows = {c: [] for c in cols}
    for b in batches:
        for i, f in enumerate(b.forms):
            for key, val in zip(cols, (b.q, b.m, b.k, i, s_r_sum(f, args.sigma, args.r, args.y_lo))):
                rows[key].append(val)
    emit(out, args.format, cols, tuple(rows.values()), _config(args))
    return EXIT_OK


_HANDLERS = {"local-transform": _cmd_local, "global-transform": _cmd_global,
             "density": _cmd_density, "convolve": _cmd_convolve, "verify": _cmd_verify,
             "mc-compare": _cmd_mc, "empirical": _cmd_empirical, "s-r-sum": _cmd_srsum}


def run(argv: Optional[List[str]] = None, stdout: Optional[IO[str]] = None,
        stderr: Optional[IO[str]] = None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        _check_common(args)
        out_path = getattr(args, "out", None)
        if args.command == "verify":
            return _cmd_verify(args, stdout)
        # compute fully before opening the output: a single writer per file
        buf = io.StringIO()
        code = _HANDLERS[args.command](args, buf)
        with _sink(out_path, stdout) as fh:
            fh.write(buf.getvalue())
        return code
    except (UsageError, ValidationError) as exc:
        stderr.write(f"mfunc: usage error: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        stderr.write(f"mfunc: numerical failure ({type(exc).__name__}): {exc}\n")
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        stderr.write(f"mfunc: data error ({type(exc).__name__}): {exc}\n")
        return EXIT_DATA


def main(argv: Optional[List[str]] = None) -> int:
    code = run(argv)
    sys.exit(code)
