"""Acceptance gate: every criterion at its stated sample sizes and tolerances.

Each test prints one ``[PASS]`` or ``[FAIL]`` line (visible with ``-s`` or
in the captured output of a failure).
"""

import pytest

from markov_bb import acceptance

CRITERIA = [getattr(acceptance, f"criterion_{k}") for k in range(1, 12)]


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 12)])
def test_criterion(check):
    result = check()
    print(result.line())
    assert result.ok, result.line()


def test_quick_demo_runs():
    results = acceptance.run_all(quick=True)
    assert [r.number for r in results] == list(range(1, 12))
    for r in results:
        print(r.line())
    assert all(r.ok for r in results)
