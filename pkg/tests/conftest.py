import numpy as np
import pytest

from hsto.grid import GridSpec, make_grid
from hsto.operators import PhysParams


@pytest.fixture
def grid8():
    return make_grid(GridSpec(1.0, 1.0, 1.0, 8, 8, 8))


@pytest.fixture
def grid16():
    return make_grid(GridSpec(1.0, 1.0, 1.0, 16, 16, 16))


@pytest.fixture
def grid_aniso():
    # unequal extents and counts to catch axis mix-ups
    return make_grid(GridSpec(0.9, 1.3, 0.7, 10, 8, 6))


@pytest.fixture
def params():
    return PhysParams(mu_v=0.3, nu_v=0.7, mu_t=0.2, nu_t=0.4,
                      mu_s=0.25, nu_s=0.5, f=0.8, g=9.81, rho0=1000.0,
                      beta_t=2e-4, beta_s=8e-4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
