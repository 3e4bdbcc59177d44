"""
Shared fixtures: seeded generators, 64-bit precision, tiny model configuration.

Tests marked ``slow`` run only when HCRNN_RUN_SLOW=1.
"""

import os

import numpy as np
import pytest

from hcrnn import tensor_core as tc
from hcrnn.hcrnn_model import ModelConfig
from hcrnn.topology import icvl, msra, nyu


def pytest_collection_modifyitems(config, items):
    if os.getenv("HCRNN_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="slow acceptance check; set HCRNN_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def restore_precision():
    previous = tc.get_default_precision()
    yield
    tc.set_default_precision(previous)


@pytest.fixture
def float64():
    with tc.default_precision("float64"):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig.tiny()


@pytest.fixture
def msra_topology():
    return msra()


@pytest.fixture
def icvl_topology():
    return icvl()


@pytest.fixture
def nyu_topology():
    return nyu()
