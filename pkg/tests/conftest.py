import numpy as np
import pytest

from graphkan import _accel
from graphkan.numerics import make_rng

BACKENDS = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


def random_graph(rng, n, p=0.4):
    from graphkan.graph import Graph

    edges = [(u, w) for u in range(n) for w in range(u + 1, n) if rng.random() < p]
    X = rng.standard_normal((n, 3))
    labels = rng.integers(0, 3, n)
    ones = np.ones(n, bool)
    zeros = np.zeros(n, bool)
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), X, labels, ones, zeros, zeros)
