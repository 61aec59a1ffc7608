"""Slow, direct reference implementations used as oracles.

Nothing here shares code with the production kernels. The vectorized
routines are dtype-generic: feed them ``np.longdouble`` arrays to evaluate a
network in extended precision, which keeps central differences free of
float64 roundoff when checking tiny gradient entries.
"""

import numpy as np


def cox_de_boor(knots, i, k, x, hi=None):
    """B_{i,k}(x) by the textbook recursion on half-open knot intervals.

    ``hi`` marks the right end of the domain: the last domain interval is
    taken as closed there so degree 0 still covers ``x == hi``.
    """
    if k == 0:
        if hi is not None and x == hi:
            return 1.0 if knots[i + 1] == hi else 0.0
        return 1.0 if knots[i] <= x < knots[i + 1] else 0.0
    left = (x - knots[i]) / (knots[i + k] - knots[i]) * cox_de_boor(knots, i, k - 1, x, hi)
    right = (knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1]) * cox_de_boor(knots, i + 1, k - 1, x, hi)
    return left + right


def basis_naive(grid, x):
    x = min(max(float(x), grid.lo), grid.hi)
    t = [float(v) for v in grid.knots]
    return np.array([cox_de_boor(t, i, grid.degree, x, grid.hi) for i in range(grid.num_basis)])


def basis_table(knots, k, lo, hi, x):
    """All bases at every entry of ``x`` via the full knot-table recursion."""
    t = np.asarray(knots).astype(x.dtype)
    x = np.clip(x, lo, hi)[..., None]
    nint = t.size - 1
    last = k + (t.size - 2 * k - 1) - 1  # last interval inside [lo, hi]
    B = ((x >= t[:-1]) & (x < t[1:])).astype(x.dtype)
    at_hi = (x[..., 0] == hi)
    B[at_hi] = 0
    B[at_hi, last] = 1
    for d in range(1, k + 1):
        B = ((x - t[: nint - d]) / (t[d:nint] - t[: nint - d]) * B[..., :-1]
             + (t[d + 1:] - x) / (t[d + 1:] - t[1: nint - d + 1]) * B[..., 1:])
    return B


def silu(x):
    return x / (1 + np.exp(-x))


def kan_edge_oracle(layer, X):
    """KAN layer output by evaluating each edge function on its own."""
    batch, n = X.shape
    m = layer.out_dim
    Y = np.zeros((batch, m))
    for b in range(batch):
        for j in range(m):
            acc = 0.0
            for i in range(n):
                x = min(max(float(X[b, i]), layer.grid.lo), layer.grid.hi)
                phi = layer.spline_w[j, i] * float(np.dot(layer.coeffs[j, i], basis_naive(layer.grid, x)))
                if layer.base == "silu":
                    phi += layer.base_w[j, i] * x / (1.0 + np.exp(-x))
                acc += phi
            Y[b, j] = acc
    return Y


def kan_ref(grid, base, coeffs, base_w, spline_w, X):
    B = basis_table(grid.knots, grid.degree, grid.lo, grid.hi, X)
    Y = np.einsum("bik,jik,ji->bj", B, coeffs, spline_w)
    if base == "silu":
        Y = Y + silu(np.clip(X, grid.lo, grid.hi)) @ base_w.T
    return Y


def dense_norm_adjacency(n_nodes, edges, self_loops=True):
    """D^-1/2 (A [+ I]) D^-1/2 as a dense matrix."""
    A = np.zeros((n_nodes, n_nodes))
    for u, w in edges:
        A[u, w] = A[w, u] = 1.0
    if self_loops:
        A += np.eye(n_nodes)
    d = A.sum(axis=1)
    return A / np.sqrt(np.outer(d, d))


def aggregate_dense(n_nodes, edges, H, self_loops=True):
    M = np.zeros_like(H)
    A = dense_norm_adjacency(n_nodes, edges, self_loops)
    for v in range(n_nodes):
        for w in range(n_nodes):
            if A[v, w] != 0:
                M[v] += A[v, w] * H[w]
    return M


def layernorm_ref(gamma, beta, X, eps=1e-5):
    mu = X.mean(axis=1, keepdims=True)
    var = ((X - mu) ** 2).mean(axis=1, keepdims=True)
    return (X - mu) / np.sqrt(var + eps) * gamma + beta


def cross_entropy_ref(logits, labels, mask):
    idx = np.flatnonzero(mask)
    z = logits[idx]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    return (lse - z[np.arange(idx.size), labels[idx]]).mean()


def model_forward_ref(config, params, A, X, grid=None):
    """Forward of a network described by ``GraphNet.config()`` and a
    name -> array mapping; ``A`` is the dense normalized adjacency."""
    kind = config["kind"]
    H = X
    feats = []

    def update(prefix, U, relu):
        if kind == "graphkan":
            return kan_ref(grid, config["base"], params[prefix + "coeffs"], params[prefix + "base_w"],
                           params[prefix + "spline_w"], U)
        Z = U @ params[prefix + "W"] + params[prefix + "b"]
        return np.maximum(Z, 0) if relu else Z

    for i in range(len(config["widths"])):
        M = A @ H
        U = np.hstack([H, M]) if config["concat_self"] else M
        Z = update(f"layers.{i}.update.", U, True)
        H = layernorm_ref(params[f"layers.{i}.norm.gamma"], params[f"layers.{i}.norm.beta"], Z)
        feats.append(H)
    return update("head.", H, False), feats
