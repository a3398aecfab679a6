import numpy as np
import pytest

from sphere_sgd.models.supervised import cached_hermite_profile
from sphere_sgd.activations import get_activation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def profile_of():
    """Hermite profiles shared across the session (kinked ones are slow)."""
    def get(name):
        return cached_hermite_profile(get_activation(name))
    return get


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda c: int(c[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
