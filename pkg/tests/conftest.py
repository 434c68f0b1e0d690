import numpy as np
import pytest

from gldpose.binning import BinningConfig


@pytest.fixture
def binning():
    return BinningConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
