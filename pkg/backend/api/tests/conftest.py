import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import problem  # noqa: E402
import settings  # noqa: E402
from problem import ProblemConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long experiment reproductions (set UNROLL_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if settings.RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set UNROLL_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_config():
    return ProblemConfig(n_x=16, n_y=8, rho=0.25, noise_std=0.1, master_seed=3)


@pytest.fixture
def small_sensing(small_config):
    return problem.build_sensing_matrix(small_config)


@pytest.fixture
def sensing64():
    return problem.build_sensing_matrix(ProblemConfig())
