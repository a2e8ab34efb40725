import random

import pytest
from hypothesis import HealthCheck, settings

from cgrflow.ir import flatten
from cgrflow.merge import merge_all
from cgrflow.samples import stepwise_networks, roberts_network, sobel_network

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture(scope="session")
def stepwise_flat():
    return [flatten(n) for n in stepwise_networks()]


@pytest.fixture(scope="session")
def stepwise_merged(stepwise_flat):
    return merge_all(stepwise_flat)


@pytest.fixture(scope="session")
def edge_merged():
    return merge_all([roberts_network(), sobel_network()])
