import os
import subprocess
import sys

import numpy as np
import pytest

from graphkan import _accel
from graphkan.graph import aggregate, normalize
from graphkan.metrics import _class_distance_sums_numpy, silhouette_samples
from graphkan.model import backward_pass, build_net, cross_entropy, forward_pass
from graphkan.spline import SplineGrid, basis_and_deriv_batch

from conftest import random_graph

needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


def test_env_flag_selects_numpy():
    code = "from graphkan import _accel; print(_accel.get_backend())"
    env = dict(os.environ, GRAPHKAN_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env[_accel.ENV_FLAG] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if _accel.HAS_NUMBA else "numpy")


def test_set_backend_roundtrip():
    prev = _accel.set_backend("numpy")
    try:
        assert _accel.get_backend() == "numpy" and not _accel.use_numba()
        with pytest.raises(ValueError):
            _accel.set_backend("cuda")
    finally:
        _accel.set_backend(prev)


@needs_numba
def test_basis_parity(rng):
    grid = SplineGrid()
    x = np.concatenate([rng.uniform(-2.5, 2.5, (40, 7)).ravel(), grid.knots, [-2.0, 2.0]]).reshape(-1, 1)
    Bn, Dn = basis_and_deriv_batch(grid, x, backend="numba")
    Bp, Dp = basis_and_deriv_batch(grid, x, backend="numpy")
    np.testing.assert_allclose(Bn, Bp, rtol=0, atol=1e-14)
    np.testing.assert_allclose(Dn, Dp, rtol=0, atol=1e-12)


@needs_numba
def test_aggregate_parity(rng):
    g = random_graph(rng, 30, 0.2)
    adj = normalize(g)
    H = rng.standard_normal((30, 5))
    np.testing.assert_allclose(aggregate(adj, H, backend="numba"), aggregate(adj, H, backend="numpy"), atol=1e-14)


@needs_numba
def test_silhouette_parity(rng):
    X = rng.standard_normal((120, 6))
    y = rng.integers(0, 4, 120)
    from graphkan.metrics import _class_distance_sums_numba

    np.testing.assert_allclose(_class_distance_sums_numba(X, y, 4), _class_distance_sums_numpy(X, y, 4),
                               rtol=1e-13)
    np.testing.assert_allclose(silhouette_samples(X, y, "numba")[0], silhouette_samples(X, y, "numpy")[0],
                               atol=1e-13)


@needs_numba
@pytest.mark.parametrize("kind", ["graphkan", "gcn"])
def test_model_parity(rng, kind):
    g = random_graph(rng, 20, 0.3)
    adj = normalize(g)
    net = build_net(kind, 3, (6, 5), rng=rng)
    out = {}
    for b in ("numba", "numpy"):
        prev = _accel.set_backend(b)
        try:
            logits, _, cache = forward_pass(net, adj, g.features)
            grads = backward_pass(net, cache, cross_entropy(logits, g.labels, g.train_mask)[1])
        finally:
            _accel.set_backend(prev)
        out[b] = (logits, grads)
    np.testing.assert_allclose(out["numba"][0], out["numpy"][0], atol=1e-12)
    for k in out["numba"][1]:
        np.testing.assert_allclose(out["numba"][1][k], out["numpy"][1][k], atol=1e-12)
