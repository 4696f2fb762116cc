import numpy as np
import pytest

from leocd.raster import BandStack, BinaryMap, ScoreMap


def stack_from(values, labels=None, bit_depth=12):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    labels = labels or [f"b{k}" for k in range(arr.shape[0])]
    return BandStack(arr, labels, bit_depth)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rgbnir(rng):
    return BandStack(rng.uniform(0, 4000, size=(4, 6, 5)), ["R", "G", "B", "Nir"])


def bmap(rows):
    return BinaryMap(np.asarray(rows, dtype=np.uint8))


def smap(rows):
    return ScoreMap(np.asarray(rows, dtype=np.float64))
