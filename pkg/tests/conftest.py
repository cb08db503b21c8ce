import numpy as np
import pytest

from dyadgehring.examples import HaircombSpec, haircomb_space, haircomb_weight, unit_interval_space
from dyadgehring.space import FiniteSpace


def brute_ball(space, center, radius):
    """Open ball by a full scan of the distance row."""
    return {j for j in range(space.n) if space.distance(center, j) < radius}


@pytest.fixture(scope="session")
def interval1024():
    return unit_interval_space(1024)


@pytest.fixture(scope="session")
def interval4096():
    return unit_interval_space(4096)


@pytest.fixture(scope="session")
def haircomb8():
    spec = HaircombSpec(teeth=8, alpha=0.5, resolution=1e-3)
    space = haircomb_space(spec)
    return spec, space, haircomb_weight(space, spec)


@pytest.fixture
def line5():
    return FiniteSpace(np.arange(5.0), np.ones(5))


ACCEPTANCE_LINES = {}


def record_verdict(number, ok, detail):
    """Print and keep one pass/fail line per acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES[number] = line
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
