import os
import sys

import numpy as np
import pytest

# flat layout: the modules live at the repository root
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import green  # noqa: E402
import mls  # noqa: E402


@pytest.fixture
def rng():
    return np.random.RandomState(1234)


@pytest.fixture(scope='session')
def sphere():
    return green.SphereKernel()


@pytest.fixture(scope='session')
def torus():
    return green.TorusKernel(1j)


@pytest.fixture
def inv_z():
    return mls.scalar_series(-1, [1.])
