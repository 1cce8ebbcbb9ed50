"""Shared fixtures and hypothesis settings for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def kappa():
    """Measured wall-sign constant, computed once per test session.

    The underlying measurement is cached per process, so flow tests that
    calibrate internally reuse this run instead of paying for a second one.
    """
    from diracflow.lattice import wall_sign_calibration

    return wall_sign_calibration()
