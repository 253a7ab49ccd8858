from pathlib import Path

import numpy as np
import pytest

from finslerlab.core import TangentSample
from finslerlab.metrics import zoo

DATA = Path(__file__).resolve().parents[1] / "src" / "finslerlab" / "data"


@pytest.fixture(scope="session")
def zoo2():
    return zoo(2)


@pytest.fixture(scope="session")
def zoo3():
    return zoo(3)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def ts(x, y):
    return TangentSample.of(x, y)


def rng(seed=0):
    return np.random.default_rng(seed)
