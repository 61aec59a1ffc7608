import numpy as np
import pytest

from graphkan.gradcheck import check_kan
from graphkan.kan import KanLayer, kan_backward, kan_forward, silu
from graphkan.reference import kan_edge_oracle
from graphkan.spline import SplineGrid


def test_zero_layer_gives_zero():
    layer = KanLayer.zeros(3, 2)
    Y, _ = kan_forward(layer, np.random.default_rng(0).standard_normal((5, 3)))
    assert np.all(Y == 0.0)


def test_pure_silu_edge():
    layer = KanLayer.zeros(1, 1)
    layer.base_w[:] = 1.0
    X = np.array([[0.0], [0.7], [-1.3]])
    Y, _ = kan_forward(layer, X)
    assert Y[0, 0] == 0.0
    np.testing.assert_allclose(Y[:, 0], silu(X[:, 0]), rtol=0, atol=1e-15)


def test_matches_per_edge_oracle(rng, backend):
    for _ in range(10):
        n, m, batch = rng.integers(1, 9, 3)
        layer = KanLayer.init(rng, n, m, SplineGrid())
        layer.spline_w[:] = rng.uniform(0.5, 1.5, layer.spline_w.shape)
        X = rng.uniform(-2.5, 2.5, (batch, n))
        Y, _ = kan_forward(layer, X)
        assert np.max(np.abs(Y - kan_edge_oracle(layer, X))) < 1e-12


def test_base_none_drops_silu(rng):
    layer = KanLayer.init(rng, 3, 2, base="none")
    X = rng.standard_normal((4, 3))
    Y, _ = kan_forward(layer, X)
    layer.base_w[:] = 100.0
    np.testing.assert_array_equal(kan_forward(layer, X)[0], Y)


def test_clamp_rule_pins_both_terms(rng):
    # outside the domain, both the spline and the silu term see the clamped input
    layer = KanLayer.init(rng, 2, 3, SplineGrid(3, 5, -1.0, 1.0))
    far = np.array([[3.0, -4.0]])
    edge = np.array([[1.0, -1.0]])
    np.testing.assert_array_equal(kan_forward(layer, far)[0], kan_forward(layer, edge)[0])
    _, cache = kan_forward(layer, far)
    dX, _ = kan_backward(layer, cache, np.ones((1, 3)))
    assert np.all(dX == 0.0)


def test_zero_upstream_gives_zero_grads(rng):
    layer = KanLayer.init(rng, 4, 3)
    _, cache = kan_forward(layer, rng.standard_normal((5, 4)))
    dX, grads = kan_backward(layer, cache, np.zeros((5, 3)))
    assert np.all(dX == 0)
    assert all(np.all(g == 0) for g in grads.values())


def test_backward_linear_in_upstream(rng):
    layer = KanLayer.init(rng, 4, 3)
    _, cache = kan_forward(layer, rng.standard_normal((5, 4)))
    dY = rng.standard_normal((5, 3))
    dX1, g1 = kan_backward(layer, cache, dY)
    dX2, g2 = kan_backward(layer, cache, 2 * dY)
    np.testing.assert_allclose(dX2, 2 * dX1, rtol=1e-14, atol=0)
    for k in g1:
        np.testing.assert_allclose(g2[k], 2 * g1[k], rtol=1e-14, atol=0)


@pytest.mark.parametrize("base", ["silu", "none"])
def test_gradients_match_finite_differences(rng, base):
    for r in check_kan(rng, n=4, m=3, batch=2, base=base):
        assert r.error < 1e-4, (r.param, r.error)


def test_output_permutation_equivariance(rng):
    layer = KanLayer.init(rng, 4, 5)
    X = rng.standard_normal((6, 4))
    perm = rng.permutation(5)
    permuted = KanLayer(layer.grid, layer.coeffs[perm], layer.base_w[perm], layer.spline_w[perm])
    np.testing.assert_allclose(kan_forward(permuted, X)[0], kan_forward(layer, X)[0][:, perm], atol=1e-14)


def test_dimension_and_cache_errors(rng):
    layer = KanLayer.init(rng, 4, 3)
    with pytest.raises(ValueError):
        kan_forward(layer, np.ones((2, 5)))
    _, cache = kan_forward(layer, np.ones((2, 4)))
    other = KanLayer.init(rng, 4, 3)
    with pytest.raises(ValueError):
        kan_backward(other, cache, np.ones((2, 3)))
    with pytest.raises(ValueError):
        kan_backward(layer, cache, np.ones((3, 3)))
    _, eval_cache = kan_forward(layer, np.ones((2, 4)), need_grad=False)
    with pytest.raises(ValueError):
        kan_backward(layer, eval_cache, np.ones((2, 3)))


def test_init_scales(rng):
    layer = KanLayer.init(rng, 16, 8)
    assert np.max(np.abs(layer.coeffs)) <= 0.1
    assert np.max(np.abs(layer.base_w)) <= 1 / 4
    assert np.all(layer.spline_w == 1.0)
    assert layer.coeffs.shape == (8, 16, layer.grid.num_basis)
