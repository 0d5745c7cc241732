"""Acceptance criteria 1-10; one PASS/FAIL line per criterion (run with ``-s`` to see them).

Criteria 1, 3 and 10 are expected to fail; see the README section on acceptance results.
"""

import pytest

from cltlab.harness.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    check = run_criterion(k, seed=0)
    with capsys.disabled():
        status = "PASS" if check.passed else "FAIL"
        print(f"\n[{status}] criterion {k}: {CRITERIA[k][0]} | value={check.value} threshold={check.threshold} "
              f"| {check.detail} ({check.seconds:.1f}s)")
    assert check.passed, check.detail
