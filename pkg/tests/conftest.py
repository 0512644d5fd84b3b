import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sshjunction import WireParams
from sshjunction.ensemble import ground_state

settings.register_profile("repo", derandomize=True, deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def wire20():
    return WireParams(n_sites=20)


@pytest.fixture(scope="session")
def ground20(wire20):
    return ground_state(wire20)[0]


@pytest.fixture(scope="session")
def modes20(wire20):
    return ground_state(wire20)[1]


@pytest.fixture(scope="session")
def wire100():
    return WireParams(n_sites=100)


@pytest.fixture(scope="session")
def ground100(wire100):
    return ground_state(wire100)


def random_geometry(n, rng, scale=0.05):
    u = scale * rng.standard_normal(n)
    u[0] = u[-1] = 0.0
    return u


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}  # criterion number -> (passed, detail), filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
