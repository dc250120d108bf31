import numpy as np
import pytest

from heli_ilqr.model import HeliParams, build_linear_model
from heli_ilqr.riccati import LqrWeights, solve_care

# Gain printed with the published tuning (rows: pitch, yaw voltage).
PRINTED_K = np.array([
    [18.9, 1.98, 7.48, 1.53, 7.03, 0.77],
    [-2.22, 19.4, -0.45, 11.9, -0.77, 7.03],
])

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params():
    return HeliParams()


@pytest.fixture(scope="session")
def model(params):
    return build_linear_model(params)


@pytest.fixture(scope="session")
def heli_care(model):
    return solve_care(model.A, model.B, LqrWeights.default())


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
