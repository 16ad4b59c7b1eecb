import acceptance_log
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wannier_homotopy.grid import KGrid
from wannier_homotopy.models import KaneMeleParams, haldane, kane_mele
from wannier_homotopy.transport import ArrayProvider

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def km_qsh():
    return kane_mele(KaneMeleParams(0.0, 1.0))


@pytest.fixture(scope="session")
def km_trivial():
    return kane_mele(KaneMeleParams(6.0, 1.0))


@pytest.fixture(scope="session")
def km_qsh_48(km_qsh):
    return ArrayProvider.from_model(km_qsh, KGrid((48, 48)))


@pytest.fixture(scope="session")
def km_trivial_48(km_trivial):
    return ArrayProvider.from_model(km_trivial, KGrid((48, 48)))


@pytest.fixture(scope="session")
def haldane_48():
    return ArrayProvider.from_model(haldane(), KGrid((48, 48)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)
