import numpy as np
import pytest

from quasiflat.perm import Permutation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def perm(*images):
    return Permutation(tuple(images))


def cyc(n, *cycles):
    return Permutation.from_cycles(n, *cycles)
