"""Acceptance criteria 1-9 at full scale; one pass/fail line each.

Run ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""
import sys

import pytest

from meroproj.checks import ALL_CHECKS

SEED = 0


@pytest.mark.parametrize("check", ALL_CHECKS, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_criterion(check, acceptance_log):
    r = check(seed=SEED, scale=1.0)
    acceptance_log.append(r.line())
    print(r.line())
    assert r.passed, f"{r.name}: {r.detail}"


if __name__ == "__main__":
    failed = 0
    for check in ALL_CHECKS:
        r = check(seed=SEED, scale=1.0)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
