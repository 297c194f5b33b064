import numpy as np
import pytest

from levelgeom import fields
from levelgeom import quadrature


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs (select with -m slow)")


@pytest.fixture
def sphere():
    return fields.Sphere(3)


@pytest.fixture
def double_well():
    return fields.DoubleWell(3)


@pytest.fixture
def torus():
    return fields.Torus(major=2.0)


@pytest.fixture
def box():
    return fields.BoundingBox.uniform(-2.5, 2.5, 3)


@pytest.fixture
def qcfg():
    return quadrature.QuadratureConfig(samples=400_000, seed=7, shell_epsilon=0.015)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
