"""
Shared fixtures
"""
import numpy as np
import pytest

from src.core.channel import draw_channels, estimate_channels, estimation_model
from src.core.config import SystemConfig
from src.core.scenario import generate_deployment
from src.harness.validation import random_coefficients
from src.utils.seeding import deployment_rng


@pytest.fixture
def default_cfg():
    """Default scenario"""
    return SystemConfig()


@pytest.fixture
def small_cfg():
    """Scenario small enough for end-to-end runs in a unit test"""
    return SystemConfig(M=16, K=4, f=1, n_channel=32, n_deployments=12, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def estimates(small_cfg):
    """(channel batch, estimates) of deployment 0 of the small scenario"""
    gen = deployment_rng(small_cfg.seed, small_cfg.K, small_cfg.f, 0)
    dep = generate_deployment(small_cfg, gen)
    batch = draw_channels(dep, small_cfg, gen)
    est = estimate_channels(batch, estimation_model(dep, small_cfg), gen)
    return batch, est


@pytest.fixture
def coeffs(rng):
    """Random K=5 SINR coefficients"""
    return random_coefficients(rng, 5)
