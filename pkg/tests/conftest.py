import numpy as np
import pytest

from kacchaos.energy import classical, relativistic
from kacchaos.equilibrium import solve_z0


@pytest.fixture(scope="session")
def cl():
    return classical()


@pytest.fixture(scope="session")
def rel():
    return relativistic()


@pytest.fixture(scope="session")
def cl_sol(cl):
    return solve_z0(cl)


@pytest.fixture(scope="session")
def rel_sol(rel):
    return solve_z0(rel)


@pytest.fixture(params=["classical", "relativistic"])
def energy_and_sol(request, cl, rel, cl_sol, rel_sol):
    return (cl, cl_sol) if request.param == "classical" else (rel, rel_sol)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
