import io

from mfunc.cli import run
from mfunc.verify import run_suite


def test_full_suite_green():
    out = io.StringIO()
    code = run(["verify", "--sigma", "0.75", "--r", "1"], out, io.StringIO())
    lines = out.getvalue().splitlines()
    assert code == 0, "\n".join(l for l in lines if l.startswith("FAIL"))
    assert lines[-1] == f"{len(lines) - 1}/{len(lines) - 1} checks passed"


def test_suite_lines_are_reproducible():
    a = [c.line() for c in run_suite(1.1, 2, only=["st_moments", "local_round_trip"])]
    b = [c.line() for c in run_suite(1.1, 2, only=["st_moments", "local_round_trip"])]
    assert a == b and all(l.startswith("PASS") for l in a)
