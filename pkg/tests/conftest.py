import numpy as np
import pytest

from polyem.modulus import ModulusSpec


@pytest.fixture
def spec():
    return ModulusSpec(beta=3.0, K=800)


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)
