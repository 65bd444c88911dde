import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from westervelt_lab import SoundSpeed, chart_for, jacobi_for, shoot_geodesic

settings.register_profile(
    "lab", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lab")

HERGLOTZ_ENTRY = (-1.0, 0.3, 0.1)


@pytest.fixture(scope="session")
def flat():
    return SoundSpeed.constant(1.0)


@pytest.fixture(scope="session")
def herglotz():
    return SoundSpeed.herglotz(1.5)


@pytest.fixture(scope="session")
def flat_jacobi(flat):
    return jacobi_for(flat, shoot_geodesic(flat, [-1, 0, 0], [1, 0, 0]))


@pytest.fixture(scope="session")
def herglotz_jacobi(herglotz):
    return jacobi_for(herglotz, shoot_geodesic(herglotz, HERGLOTZ_ENTRY, [1, 0, 0]))


@pytest.fixture(scope="session")
def flat_chart(flat):
    return chart_for(flat, [-1, 0, 0], [1, 0, 0], t_minus=1.0, rho=1.0)


@pytest.fixture(scope="session")
def herglotz_chart(herglotz):
    return chart_for(herglotz, HERGLOTZ_ENTRY, [1, 0, 0], t_minus=1.0, rho=0.25)


def observed_order(errors, ratio=2.0):
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def verdict():
    """Record and print the PASS/FAIL line of an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
