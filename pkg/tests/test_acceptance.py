"""The twelve acceptance criteria at full trial counts.

Each test prints one PASS/FAIL line (also collected into the terminal
summary). Runs are shared between criteria through the suite cache. Expect
two to three hours on one core; ``POPSIM_THREADS`` spreads trials over
worker processes.
"""
import pytest

from popsim import suites

from .conftest import ACCEPTANCE_LINES


def check(result):
    line = result.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert result.passed, line


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(suites.CRITERIA))
def test_criterion(number):
    check(suites.CRITERIA[number]())
