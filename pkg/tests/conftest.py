"""
conftest.py
-----------
Shared fixtures and the `slow` marker. Full-size statistical runs are marked
slow and only execute with --runslow; the default suite checks the same
properties on reduced sample counts.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from src.qstate import BlochTensor  # noqa: E402

INPUTS = REPO_ROOT / "inputs"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size statistical run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def bell_tensor():
    """|Phi+>: n11 = 1, n22 = -1, n33 = 1."""
    return BlochTensor.from_entries(2, {"11": 1.0, "22": -1.0, "33": 1.0})


@pytest.fixture()
def crossing_tensor():
    return BlochTensor.from_entries(2, {"11": 1.0, "22": 0.8, "33": 0.6})


@pytest.fixture()
def avoided_tensor():
    return BlochTensor.from_entries(2, {"11": 1.0, "22": 0.8, "33": 0.6, "13": 0.2, "31": 0.2})


@pytest.fixture()
def inputs_dir():
    return INPUTS
