import numpy as np
import pytest

from bandsup import BandConfig, BandWindow, PowerSpectrum
from bandsup.validation import load_fixtures


@pytest.fixture(scope="session")
def spec():
    return PowerSpectrum()


@pytest.fixture(scope="session")
def bump():
    return BandWindow()


@pytest.fixture(scope="session")
def fixtures():
    return load_fixtures()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n].line())
