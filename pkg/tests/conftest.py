import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from critrace.cli import FIXTURES
from critrace.periods import find_periods
from critrace.symbol import load_hamiltonian

settings.register_profile("critrace", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("critrace")

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


def _load(name):
    return load_hamiltonian(FIXTURES / f"{name}.ham")


@pytest.fixture(scope="session")
def example1():
    p, cd = _load("example1")
    (period,) = find_periods(cd, 1.0, 7.0)
    return p, cd, period


@pytest.fixture(scope="session")
def siegel_moser():
    p, cd = _load("siegel_moser")
    periods = find_periods(cd, 1.0, 7.0)
    return p, cd, periods


@pytest.fixture(scope="session")
def definite():
    return _load("definite")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
