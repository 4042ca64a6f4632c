import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cantor_seq():
    from turnpike import SampledSequence, cantor_orbit

    return SampledSequence(cantor_orbit(10_000)[:, None], [[0.0, 1.0]])


@pytest.fixture(scope="session")
def alternating():
    import numpy as np

    from turnpike import SampledSequence

    n = np.arange(1, 101)
    return SampledSequence(np.where(n % 2 == 0, 1.0, -1.0)[:, None], [[-1.0, 1.0]])
