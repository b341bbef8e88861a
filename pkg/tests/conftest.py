import numpy as np
import pytest
from scipy.special import expit

from acre.chemistry import ModelParams
from acre.mesh import build_mesh


def circle_phi(mesh, lam=0.05, r0=0.3):
    x, y = mesh.centers
    return expit(-4.0 * (r0 - np.hypot(x - 0.5, y - 0.5)) / lam)


def layer_phi(mesh, lam=0.05, y0=0.25):
    x, y = mesh.centers
    return expit(-4.0 * (y0 - y) / lam)


@pytest.fixture
def mesh20():
    return build_mesh(20, 20)


@pytest.fixture
def dissolving():
    """Small dissolving-circle setup: mesh, params, rate, dt."""
    return build_mesh(40, 40), ModelParams(lam=0.05, gamma=0.1), -0.1, 1e-3


# one summary line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
