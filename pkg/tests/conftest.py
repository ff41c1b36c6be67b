import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spdepeaks.grid import Grid
from spdepeaks.kernels import Heat, Wave
from spdepeaks.levy import Brownian
from spdepeaks.oracle import RenewalProblem, solve_second_moment
from spdepeaks.profiles import Bump, InitialData

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# grids used by the front-speed checks
WAVE_FRONT_GRID = dict(dt=1 / 64, T=20.0, save_every=8)
HEAT_FRONT_GRID = Grid(1 / 64, 1 / 16, 40.0, None, 16)


def front_alphas(scale: float) -> np.ndarray:
    return scale * np.round(np.arange(0.0, 1.5 + 1e-9, 0.02), 10)


@pytest.fixture(scope="session")
def wave_front_fields():
    """Oracle second-moment fields for Bump data, lambda = 1, at kappa = 1 and 2."""
    out = {}
    for kappa in (1.0, 2.0):
        g = Grid(WAVE_FRONT_GRID["dt"], kappa * WAVE_FRONT_GRID["dt"], WAVE_FRONT_GRID["T"],
                 None, WAVE_FRONT_GRID["save_every"])
        prob = RenewalProblem(Wave(kappa), 1.0, InitialData(Bump()), g).resolved()
        out[kappa] = solve_second_moment(prob)
    return out


@pytest.fixture(scope="session")
def heat_front_fields():
    """Oracle second-moment fields for Bump data, lambda = 1, kappa in {0.5, 1, 2}, T = 40."""
    out = {}
    for kappa in (0.5, 1.0, 2.0):
        prob = RenewalProblem(Heat(Brownian(kappa)), 1.0, InitialData(Bump()), HEAT_FRONT_GRID).resolved()
        out[kappa] = solve_second_moment(prob)
    return out


@pytest.fixture
def report_line(capsys):
    """Print one line straight to the terminal, bypassing capture."""

    def emit(text: str):
        with capsys.disabled():
            sys.stdout.write("\n" + text + "\n")
            sys.stdout.flush()

    return emit
