import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markov_bb.chain import build_chain, random_reversible_chain
from markov_bb.operators import default_params

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def sym2():
    """Symmetric 2-state chain with K = [[0.5, 0.5], [0.5, 0.5]]."""
    return build_chain([[0.5, 0.5], [0.5, 0.5]])


@pytest.fixture
def flip2():
    return build_chain([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def chain5():
    return random_reversible_chain(5, seed=42)


@pytest.fixture
def params5(chain5):
    return default_params(chain5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
