"""Shared fixtures: the reference array and a trained default-grid model.

The grid model is expensive to train (~15 s), so it is built once per
session and shared; train_grid_model also memoizes per (array, grid,
hyperparams, config), making repeat requests free.
"""

import numpy as np
import pytest

from qsbeam.geometry import ArrayParams, build_hybrid_layout
from qsbeam.pipeline import Scenario, train_grid_model


@pytest.fixture(scope="session")
def table1_params():
    return ArrayParams()


@pytest.fixture(scope="session")
def table1_layout(table1_params):
    return build_hybrid_layout(table1_params)


@pytest.fixture(scope="session")
def default_scenario():
    return Scenario()


@pytest.fixture(scope="session")
def default_model(default_scenario):
    return train_grid_model(default_scenario.array, default_scenario.grid)


@pytest.fixture()
def rng():
    # function-scoped: every test draws the same deterministic stream
    return np.random.default_rng(20260816)
