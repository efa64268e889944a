import numpy as np
import pytest

from mfpolaron.fields import make_grid

TWO_PI = 2 * np.pi


@pytest.fixture
def grid2pi():
    return make_grid(32, TWO_PI)


@pytest.fixture
def grid16():
    return make_grid(32, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
