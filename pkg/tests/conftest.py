from pathlib import Path

import numpy as np
import pytest

from copula_wavelet.copulas import FGM, Independence
from copula_wavelet.wavelets import get_wavelet

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def haar():
    return get_wavelet("haar")


@pytest.fixture
def db2():
    return get_wavelet("db2")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fgm():
    return FGM(theta=0.75)


@pytest.fixture
def fgm_sample(fgm):
    return fgm.sample(1000, 3)


@pytest.fixture
def independence():
    return Independence(dim=2)


@pytest.fixture
def config_dir():
    return CONFIG_DIR
