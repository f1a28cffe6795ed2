from pathlib import Path

import numpy as np
import pytest

from scenario_imdp.abstraction import enabled_actions
from scenario_imdp.benchmarks import benchmark

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def samples_1d():
    """100 one-dimensional noise samples; 34/18/42 fall in [-3,-1)/[-1,1)/[1,3), 6 outside."""
    return np.loadtxt(DATA / "samples_1d.txt").reshape(-1, 1)


@pytest.fixture(scope="session")
def bas1():
    return benchmark("bas1zone")


@pytest.fixture(scope="session")
def bas1_actions(bas1):
    return enabled_actions(bas1.system, bas1.partition)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
