import numpy as np
import pytest

from beamlab.basis import SpectralBasis


@pytest.fixture(scope="session")
def basis16():
    return SpectralBasis(16)


@pytest.fixture(scope="session")
def basis8():
    return SpectralBasis(8)


@pytest.fixture(scope="session")
def basis4():
    return SpectralBasis(4)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
