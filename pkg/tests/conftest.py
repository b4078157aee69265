import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edmbranch import (ModelParams, SolverOptions, assemble_limit_state, build_grid,  # noqa: E402
                       continue_branch, solve_ground_state)

DESK_N = 2000
DESK_RMAX = 40.0


@pytest.fixture(scope="session")
def params():
    return ModelParams(1.0, 0.6)


@pytest.fixture(scope="session")
def desk_grid():
    return build_grid(DESK_N, DESK_RMAX)


@pytest.fixture(scope="session")
def ground_state(params, desk_grid):
    return solve_ground_state(params, desk_grid, tol=1e-10)


@pytest.fixture(scope="session")
def limit_state(ground_state, params):
    return assemble_limit_state(ground_state, params)


@pytest.fixture(scope="session")
def desk_branch(params, limit_state):
    return continue_branch(params, 1e-2, 10, SolverOptions(tol=1e-10), limit=limit_state)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
