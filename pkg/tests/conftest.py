"""Shared fixtures: grids, fields and a small ensemble."""

import numpy as np
import pytest

from src.models.datatypes import EnsembleSpec, Field, GridSpec
from src.providers.ensembles import FieldEnsemble
from src.providers.initial_data import make_initial_data


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def torus_grid() -> GridSpec:
    return GridSpec(64, 2.0 * np.pi)


@pytest.fixture
def plane_grid() -> GridSpec:
    """Box for the unit-time kernel: scale 1 >= 4 dx and L >= 16."""
    return GridSpec(256, 32.0)


@pytest.fixture
def ensemble() -> FieldEnsemble:
    return FieldEnsemble(EnsembleSpec(seed=3, count=6))


@pytest.fixture
def gaussian() -> Field:
    return make_initial_data("radial_gaussian", {"width": 0.65}, GridSpec(128, 32.0), amplitude=0.01)
