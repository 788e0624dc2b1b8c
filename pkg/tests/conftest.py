import numpy as np
import pytest

from geowrap import Manifold


@pytest.fixture
def h2():
    return Manifold.hyperboloid(2)


@pytest.fixture
def s2():
    return Manifold.sphere(2)


@pytest.fixture
def e2():
    return Manifold.euclidean(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
