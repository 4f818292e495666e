import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def four_rooms():
    from mfgbench.envs import build_four_rooms

    return build_four_rooms()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
