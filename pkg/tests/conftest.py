import numpy as np
import pytest

from exkin.kinetic import (
    BgkModel,
    BroadwellModel,
    DistState,
    SpectralMaxwellModel,
    VelocityGrid,
    maxwellian_values,
)


@pytest.fixture(scope="session")
def grid1d():
    return VelocityGrid(dim=1, extent=10.0, points=64)


@pytest.fixture(scope="session")
def bgk(grid1d):
    return BgkModel(grid1d, mu0=1.0)


@pytest.fixture(scope="session")
def broadwell():
    return BroadwellModel()


@pytest.fixture(scope="session")
def grid2d():
    return VelocityGrid(dim=2, extent=8.0, points=32)


@pytest.fixture(scope="session")
def spectral(grid2d):
    # kernel tables are cached per parameter set, so session scope keeps the
    # spectral tests cheap
    return SpectralMaxwellModel(grid2d, modes=32, kernel_s=1.0)


@pytest.fixture
def bimodal1d(grid1d):
    values = maxwellian_values(grid1d, 0.6, [0.6], 0.9) + maxwellian_values(grid1d, 0.4, [-0.6], 1.1)
    return DistState.on_grid(grid1d, values)


@pytest.fixture
def bimodal2d(grid2d):
    values = maxwellian_values(grid2d, 0.6, [0.8, 0.1], 0.9) + maxwellian_values(
        grid2d, 0.7, [-0.5, -0.3], 1.3
    )
    return DistState.on_grid(grid2d, values)


@pytest.fixture
def dvm_state():
    return DistState.dvm(0.8, 0.1, 0.4)


def random_dvm_states(rng, count):
    return [DistState.dvm(*rng.uniform(0.05, 1.5, size=3)) for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
