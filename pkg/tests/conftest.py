import numpy as np
import pytest

from dtmsim.model import load_scenario
from dtmsim.reference_rk4 import RK4Config, rk4_simulate
from dtmsim.sas_engine import SimConfig, simulate
from dtmsim.smib import SMIBSystem
from dtmsim.tuning import post_fault_probes

# (number, title, passed, detail) per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")


@pytest.fixture(scope="session")
def ieee39():
    return load_scenario("ieee39")


@pytest.fixture(scope="session")
def model39(ieee39):
    return ieee39.model


@pytest.fixture(scope="session")
def rk4_run(model39):
    return rk4_simulate(model39, RK4Config(step=1.0 / 1200.0, duration=6.0))


@pytest.fixture(scope="session")
def dtm_run(model39):
    return simulate(model39, SimConfig(order=12, window=0.2, duration=6.0), keep_windows=True)


@pytest.fixture(scope="session")
def probes39(model39):
    return post_fault_probes(model39)


@pytest.fixture
def smib():
    return SMIBSystem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
