import numpy as np
import pytest

from vectorhost.model import HeterogeneityParams, constant_spec, parametric_spec
from vectorhost.numerics import Numerics

BASELINE = (2.0, 1.0, 1.0, 3.0, 3.0, 2.0, 1.0, 2.0)
ENDEMIC = (2.0, 1.0, 1.0, 3.0, 3.0, 1.0, 1.0, 2.0)


@pytest.fixture
def baseline_spec():
    return constant_spec(BASELINE)


@pytest.fixture
def endemic_spec():
    return constant_spec(ENDEMIC)


@pytest.fixture
def hetero_spec():
    return parametric_spec(HeterogeneityParams.from_pq([0.5] * 4, [0.0] * 4))


@pytest.fixture
def coarse():
    """Cheap numerics for unit tests."""
    return Numerics(N=20, dt=1 / 200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
