import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bbmburgers.spectral import Grid1D

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid128() -> Grid1D:
    return Grid1D(128)


@pytest.fixture
def grid32() -> Grid1D:
    return Grid1D(32)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
