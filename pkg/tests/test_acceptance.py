"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected in the terminal summary.
"""
import pytest

from acceptance_runs import LINES, Outcome, run_all_criteria, tree_bytes

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_a")
    return out, run_all_criteria(out)


def _report(outcome):
    line = outcome.line()
    LINES.append(line)
    print("\n" + line)
    for d in outcome.diagnostics:
        LINES.append(f"    diagnostic: {d}")
        print(f"    diagnostic: {d}")
    return outcome


@pytest.mark.parametrize("number", [str(k) for k in range(1, 10)])
def test_criterion(first_run, number):
    _, outcomes = first_run
    outcome = _report(outcomes[number])
    assert outcome.passed, outcome.summary


def test_criterion_10_reproducible(first_run, tmp_path_factory):
    out_a, _ = first_run
    out_b = tmp_path_factory.mktemp("acceptance_b")
    run_all_criteria(out_b)
    a, b = tree_bytes(out_a), tree_bytes(out_b)
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = not differing and len(a) > 0
    _report(Outcome("10", "bitwise reproducibility of criteria 1-9 outputs", ok,
                    f"{len(a)} files compared, {len(differing)} differ" + (f": {differing}" if differing else "")))
    assert ok
