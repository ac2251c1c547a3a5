import pytest

from ldp_meanest.normal_math import RngStream


@pytest.fixture
def rng():
    return RngStream(12345)


def bisect_inverse(f, target, lo=-40.0, hi=40.0, tol=1e-13):
    """Inverse of a monotone increasing ``f`` by plain bisection."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
