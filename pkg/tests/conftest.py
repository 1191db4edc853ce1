import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from relmargin import _backend

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(params=_backend.available())
def kern(request):
    """Each importable kernel backend in turn."""
    return _backend.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
