import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from colombeau_lab.experiments import standard_setup
from colombeau_lab.geometry import ChartDomain

settings.register_profile("default", max_examples=20, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def dom1():
    return ChartDomain.box([-3.0], [3.0])


@pytest.fixture(scope="session")
def dom2():
    return ChartDomain.box([-3.0, -3.0], [3.0, 3.0])


@pytest.fixture(scope="session")
def setup1():
    return standard_setup()


@pytest.fixture(scope="session")
def setup2():
    return standard_setup(ChartDomain.box([-3.0, -3.0], [3.0, 3.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
