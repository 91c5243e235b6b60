import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rfpi.grid import Grid

settings.register_profile(
    "rfpi",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("rfpi")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid256():
    return Grid(1, 10.0, 256)


@pytest.fixture(scope="session")
def grid1024():
    return Grid(1, 12.0, 1024)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
