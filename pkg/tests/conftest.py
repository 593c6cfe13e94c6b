import sys
import numpy as np
import pytest

from fracplap import assemble, build_grid


@pytest.fixture(scope="session")
def grid128():
    return build_grid(-1.0, 1.0, 128)


@pytest.fixture(scope="session")
def grid256():
    return build_grid(-1.0, 1.0, 256)


@pytest.fixture(scope="session")
def E2_256(grid256):
    return assemble(grid256, 0.5, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
