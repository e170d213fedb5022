import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ladderqed import DriveConfig, SystemParams

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def device():
    return SystemParams.device()


@pytest.fixture
def ideal():
    return SystemParams.device().ideal()


@pytest.fixture
def two_photon_drive(ideal):
    return DriveConfig.from_rabi10(ideal.omega20 / 2.0, 0.5)


def random_density_matrix(rng, n=3):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(label, title, passed, detail):
    label = str(label)
    line = f"criterion {label:<3} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[label] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    def key(label):
        digits = "".join(ch for ch in label if ch.isdigit())
        return int(digits), label

    for label in sorted(ACCEPTANCE_LINES, key=key):
        terminalreporter.write_line(ACCEPTANCE_LINES[label])
