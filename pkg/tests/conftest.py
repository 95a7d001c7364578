import numpy as np
import pytest

from qofdm.config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cfg():
    return RunConfig()


@pytest.fixture
def flat_cfg():
    """Single unit path at zero delay."""
    return RunConfig().replace(channel__delays_us=[0.0], channel__attenuations_db=[0.0])


@pytest.fixture
def small_cfg():
    """Default link with a sweep small enough for unit tests."""
    return RunConfig().replace(sweep__files_per_point=2, sweep__repetitions=20)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
