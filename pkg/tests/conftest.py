import numpy as np
import pytest

from segretool import catalog
from segretool.config import make_rng


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(None)


@pytest.fixture
def mlog():
    return catalog.get("mlog")


@pytest.fixture
def ex62():
    return catalog.get("ex62")


@pytest.fixture
def sphere():
    return catalog.get("quadric(1,0)")
