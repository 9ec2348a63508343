import math

import pytest

from cavlab.twoball import solve_geometry


@pytest.fixture(scope="session")
def geometry_mid():
    """Overlapping balls, moderate volume ratio."""
    return solve_geometry(1.0, 0.4, 1.0, 0.5)


@pytest.fixture(scope="session")
def geometry_fig():
    """The mu = 1.5, ratio = 0.3 family at delta = 0.4."""
    total = math.pi * 1.5**2
    return solve_geometry(1.0, 0.4, total / 1.3, 0.3 * total / 1.3)


_verdicts = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion and return the flag."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _verdicts[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        terminalreporter.write_line(_verdicts[number])
