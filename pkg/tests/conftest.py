import math

import numpy as np
import pytest

from cmcflow.integrator import IntegratorConfig, flow, integrate
from cmcflow.phase import ModelParams

ACCEPTANCE_LINES: list[str] = []

UNDULOID = (0.1, 0.0, 0.1, 0.0)
NODOID = (1.0, 0.0, 0.0, 0.0)
HELICOIDAL = (1.0, 0.0, 0.0, 1.0)
CYLINDER = (0.5, 0.0, 0.5, 0.0)
SEPARATRIX = (math.sqrt(0.5), 0.0, math.sqrt(0.5), 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


def _run(y0, t_end, stride=1, dt=1e-3, t_start=0.0):
    return integrate(y0, ModelParams(), IntegratorConfig(dt=dt, t_span=(t_start, t_end), record_stride=stride))


@pytest.fixture(scope="session")
def cylinder_traj():
    return _run(CYLINDER, 10.0, stride=10)


@pytest.fixture(scope="session")
def unduloid_traj():
    return _run(UNDULOID, 15.0, stride=1)


@pytest.fixture(scope="session")
def nodoid_traj():
    return _run(NODOID, 5.0, stride=10)


@pytest.fixture(scope="session")
def helicoidal_traj():
    return _run(HELICOIDAL, 5.0, stride=10)


@pytest.fixture(scope="session")
def sphere_traj():
    """Separatrix orbit from t = -8 to 8, centred on its point of largest rho."""
    p = ModelParams()
    start, _ = flow(SEPARATRIX, p, -8.0, IntegratorConfig(dt=1e-3, t_span=(0.0, 1e-3)))
    return integrate(start, p, IntegratorConfig(dt=1e-3, t_span=(-8.0, 8.0), record_stride=20))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
