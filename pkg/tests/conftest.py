import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hsmatch import KernelParams, build_polygon


@pytest.fixture(scope="session")
def unit_square():
    return build_polygon([(0.5, -0.5), (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5)])


@pytest.fixture(scope="session")
def kp1():
    return KernelParams(1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
