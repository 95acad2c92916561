"""Acceptance checks, one test per sub-check, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for the table without pytest.
"""

import pytest

from transitlab.acceptance import CRITERIA, run_criteria

# (criterion, sub-check key); the d = 4 printed-prefactor comparison fails as stated
SUBCHECKS = [
    ("1", "1"),
    ("2", "2"),
    ("3", "3"),
    ("4", "4"),
    ("5", "5.d3"), ("5", "5.d4"),
    ("6", "6.d3"), ("6", "6.d4"),
    ("7", "7.d3_mu0"), ("7", "7.d3_mu1"), ("7", "7.d4_printed"), ("7", "7.d4_corrected"),
    ("8", "8.d3_mu0"), ("8", "8.d4_mu0"), ("8", "8.d3_mu1"), ("8", "8.d4_mu-1"),
    ("9", "9.sine"), ("9", "9.cos2"),
    ("10", "10.d3"), ("10", "10.d4"),
]
KNOWN_FAILURES = {
    "7.d4_printed": "the printed d=4 prefactor leaves a relative error near 0.68 at lambda=-800",
}

_results: dict = {}


def result_for(ctx, criterion, key):
    if criterion not in _results:
        _results[criterion] = {r.key: r for r in CRITERIA[criterion](ctx)}
    return _results[criterion][key]


def _case(criterion, key):
    if key in KNOWN_FAILURES:
        return pytest.param(criterion, key, id=key, marks=pytest.mark.xfail(strict=True, reason=KNOWN_FAILURES[key]))
    return pytest.param(criterion, key, id=key)


def test_every_subcheck_is_listed(ctx):
    listed = {key for _, key in SUBCHECKS}
    assert {c for c, _ in SUBCHECKS} == set(CRITERIA)
    # criteria 3 and 4 are cheap, so their keys can be checked without running the rest
    assert {r.key for r in CRITERIA["3"](ctx) + CRITERIA["4"](ctx)} <= listed


@pytest.mark.parametrize("criterion, key", [_case(c, k) for c, k in SUBCHECKS])
def test_criterion(ctx, capsys, criterion, key):
    res = result_for(ctx, criterion, key)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.expected_failure == (key in KNOWN_FAILURES)
    assert res.passed, res.to_dict()


if __name__ == "__main__":
    import sys

    outcome = run_criteria(log=print)
    unexpected = [r for r in outcome if r.passed == r.expected_failure]
    sys.exit(1 if unexpected else 0)
