import math

import pytest

ACCEPTANCE_LINES: list[str] = []


def beta1_bisection(lo: float = 4.0, hi: float = 5.0, iters: int = 200) -> float:
    """First positive root of cos(b) cosh(b) = 1 by plain bisection."""
    f = lambda b: math.cos(b) * math.cosh(b) - 1.0  # noqa: E731
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="session")
def beta1():
    return beta1_bisection()


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
