"""Finite-difference checks of every analytic backward pass in the package.

The analytic side is the production float64 code. The numeric side takes
central differences (``eps = 1e-5``) of the independent forward in
:mod:`graphkan.reference`, evaluated in ``np.longdouble``; at float64 the
difference quotient carries ~1e-11 of roundoff, which swamps the many
spline-coefficient gradients that are only ~1e-8 in size.
"""

from dataclasses import dataclass

import numpy as np

from . import reference as ref
from .graph import Graph, normalize
from .kan import KanLayer, kan_backward, kan_forward
from .model import (DenseUpdate, backward_pass, build_net, cross_entropy, forward_pass,
                    layernorm_backward, layernorm_forward, relu_backward, relu_forward)
from .numerics import finite_diff_grad, make_rng, rel_error
from .spline import SplineGrid, basis_and_deriv_batch

EPS = 1e-5
TOLERANCE = 1e-4
ABS_FLOOR = 1e-8
SPLINE_ABS_TOL = 1e-6
XP = np.longdouble


@dataclass
class CheckResult:
    component: str
    param: str
    error: float
    kind: str = "rel"  # "abs" for the spline derivative check

    def passed(self, tol=TOLERANCE):
        return self.error < (min(tol, SPLINE_ABS_TOL) if self.kind == "abs" else tol)


def _ext(a):
    return np.asarray(a).astype(XP)


def _check(component, name, f, x, analytic):
    numeric = finite_diff_grad(f, _ext(x), EPS)
    return CheckResult(component, name, rel_error(analytic, numeric.astype(np.float64), ABS_FLOOR))


def _swap(params, name, f):
    # f evaluated with params[name] replaced by the probe value
    def g(v):
        return f({**params, name: v})
    return g


def check_spline(rng, grid=None, n_points=100):
    grid = grid or SplineGrid(3, 5, -1.0, 1.0)
    x = rng.uniform(grid.lo + 1e-3, grid.hi - 1e-3, n_points)
    _, D = basis_and_deriv_batch(grid, x)
    h = 1e-6
    Bp = ref.basis_table(grid.knots, grid.degree, grid.lo, grid.hi, x + h)
    Bm = ref.basis_table(grid.knots, grid.degree, grid.lo, grid.hi, x - h)
    err = float(np.max(np.abs((Bp - Bm) / (2 * h) - D)))
    return [CheckResult("spline", "basis_deriv", err, "abs")]


def check_kan(rng, n=4, m=3, batch=2, base="silu"):
    layer = KanLayer.init(rng, n, m, SplineGrid(), base)
    X = rng.uniform(-1.9, 1.9, (batch, n))
    R = rng.standard_normal((batch, m))
    _, cache = kan_forward(layer, X)
    dX, grads = kan_backward(layer, cache, R)
    p = {k: _ext(v) for k, v in layer.params().items()}
    p["X"] = _ext(X)
    Rx = _ext(R)

    def loss(q):
        return np.sum(Rx * ref.kan_ref(layer.grid, base, q["coeffs"], q["base_w"], q["spline_w"], q["X"]))

    grads = dict(grads, X=dX)
    return [_check(f"kan[{base}]", k, _swap(p, k, loss), p[k], grads[k]) for k in ("X", *layer.params())]


def check_layernorm(rng, rows=5, d=7):
    gamma = rng.uniform(0.5, 1.5, d)
    beta = rng.standard_normal(d)
    X = rng.standard_normal((rows, d))
    R = rng.standard_normal((rows, d))
    _, cache = layernorm_forward(gamma, beta, X)
    dX, dg, db = layernorm_backward(cache, R)
    p = {"X": _ext(X), "gamma": _ext(gamma), "beta": _ext(beta)}
    Rx = _ext(R)

    def loss(q):
        return np.sum(Rx * ref.layernorm_ref(q["gamma"], q["beta"], q["X"]))

    analytic = {"X": dX, "gamma": dg, "beta": db}
    return [_check("layernorm", k, _swap(p, k, loss), p[k], analytic[k]) for k in p]


def check_relu(rng, size=20):
    x = rng.uniform(-2, 2, size)
    x = np.where(np.abs(x) < 1e-3, 0.5, x)
    R = rng.standard_normal(size)
    _, mask = relu_forward(x)
    Rx = _ext(R)
    return [_check("relu", "x", lambda v: np.sum(Rx * np.maximum(v, 0)), x, relu_backward(mask, R))]


def check_dense(rng, rows=5, n=4, m=3):
    layer = DenseUpdate.init(rng, n, m, relu=True)
    X = rng.standard_normal((rows, n))
    R = rng.standard_normal((rows, m))
    _, cache = layer.forward(X)
    dX, grads = layer.backward(cache, R)
    p = {"X": _ext(X), "W": _ext(layer.W), "b": _ext(layer.b)}
    Rx = _ext(R)

    def loss(q):
        return np.sum(Rx * np.maximum(q["X"] @ q["W"] + q["b"], 0))

    grads = dict(grads, X=dX)
    return [_check("dense", k, _swap(p, k, loss), p[k], grads[k]) for k in p]


def check_cross_entropy(rng, rows=7, classes=6):
    logits = rng.standard_normal((rows, classes)) * 2
    labels = rng.integers(0, classes, rows)
    mask = np.ones(rows, bool)
    mask[0] = False
    _, d = cross_entropy(logits, labels, mask)
    return [_check("cross_entropy", "logits", lambda v: ref.cross_entropy_ref(v, labels, mask), logits, d)]


def toy_graph(rng, n_nodes=6, d_in=4):
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]
    X = rng.standard_normal((n_nodes, d_in))
    labels = np.arange(n_nodes) % 3
    ones = np.ones(n_nodes, bool)
    none = np.zeros(n_nodes, bool)
    return Graph(n_nodes, np.array(edges), X, labels, ones, none, none)


def check_model(rng, kind, widths=(8, 8, 8), concat_self=False):
    """Whole-network check on a 6-node graph with a 3-class head."""
    g = toy_graph(rng)
    adj = normalize(g, self_loops=True)
    net = build_net(kind, g.d_in, widths, n_classes=3, rng=rng, concat_self=concat_self)
    # move LayerNorm affine params off their init so their gradients are generic
    for gamma, beta in net.norms:
        gamma += rng.uniform(-0.2, 0.2, gamma.shape)
        beta += rng.uniform(-0.2, 0.2, beta.shape)

    logits, _, cache = forward_pass(net, adj, g.features)
    _, dlogits = cross_entropy(logits, g.labels, g.train_mask)
    grads = backward_pass(net, cache, dlogits)

    cfg = net.config()
    grid = net.updates[0].layer.grid if kind == "graphkan" else None
    A = _ext(ref.dense_norm_adjacency(g.n_nodes, g.edges, True))
    X = _ext(g.features)
    p = {k: _ext(v) for k, v in net.params().items()}

    def loss(q):
        out, _ = ref.model_forward_ref(cfg, q, A, X, grid)
        return ref.cross_entropy_ref(out, g.labels, g.train_mask)

    label = f"model[{kind}{'+self' if concat_self else ''}]"
    return [_check(label, k, _swap(p, k, loss), p[k], grads[k]) for k in p]


def run_all(seed=0, widths=(8, 8, 8), include_concat=True):
    rng = make_rng(seed, 99)
    results = []
    results += check_spline(rng)
    results += check_kan(rng)
    results += check_kan(rng, base="none")
    results += check_layernorm(rng)
    results += check_relu(rng)
    results += check_dense(rng)
    results += check_cross_entropy(rng)
    results += check_model(rng, "graphkan", widths)
    results += check_model(rng, "gcn", widths)
    if include_concat:
        results += check_model(rng, "graphkan", widths, concat_self=True)
    return results


def worst_by_component(results):
    worst = {}
    for r in results:
        if r.component not in worst or r.error > worst[r.component].error:
            worst[r.component] = r
    return worst
