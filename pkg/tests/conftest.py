import numpy as np
import pytest

from smalldev import AR1, IID, WeightSequence, build, materialize, spectrum

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def w1():
    return WeightSequence(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def ar1_window():
    return materialize(AR1(0.5), 1e-14)


@pytest.fixture(scope="session")
def iid_window():
    return materialize(IID(1.0), 1e-14)


@pytest.fixture(scope="session")
def ar1_spectrum_2000(ar1_window, w1):
    return spectrum(build(ar1_window, w1, 2000))


@pytest.fixture(scope="session")
def ar1_spectrum_200(ar1_window, w1):
    return spectrum(build(ar1_window, w1, 200))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
