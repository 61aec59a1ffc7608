"""Kolmogorov-Arnold layer with analytic forward and backward passes.

Output unit ``j`` is ``sum_i phi_ji(x_i)`` where every edge function is

    phi_ji(x) = base_w[j, i] * silu(x) + spline_w[j, i] * sum_q coeffs[j, i, q] * B_q(x)

and all edges share one :class:`~graphkan.spline.SplineGrid`. Inputs are
clamped to the grid domain before *both* terms are evaluated, so ``phi`` is
constant outside the domain and its input gradient there is zero.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix
from .spline import SplineGrid, basis_and_deriv_batch, basis_batch

BASES = ("silu", "none")


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass(eq=False)
class KanLayer:
    grid: SplineGrid
    coeffs: np.ndarray  # (out, in, num_basis)
    base_w: np.ndarray  # (out, in)
    spline_w: np.ndarray  # (out, in)
    base: str = "silu"

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"base must be one of {BASES}, got {self.base!r}")
        m, n, nb = self.coeffs.shape
        if nb != self.grid.num_basis:
            raise ValueError(f"coeffs carry {nb} bases per edge, grid defines {self.grid.num_basis}")
        if self.base_w.shape != (m, n) or self.spline_w.shape != (m, n):
            raise ValueError("base_w/spline_w must have shape (out_dim, in_dim)")

    @property
    def in_dim(self):
        return self.coeffs.shape[1]

    @property
    def out_dim(self):
        return self.coeffs.shape[0]

    def params(self):
        return {"coeffs": self.coeffs, "base_w": self.base_w, "spline_w": self.spline_w}

    @classmethod
    def init(cls, rng, in_dim, out_dim, grid=None, base="silu", coeff_scale=0.1):
        grid = grid or SplineGrid()
        coeffs = rng.uniform(-coeff_scale, coeff_scale, size=(out_dim, in_dim, grid.num_basis))
        bound = 1.0 / np.sqrt(in_dim)
        base_w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        spline_w = np.ones((out_dim, in_dim))
        return cls(grid, coeffs, base_w, spline_w, base)

    @classmethod
    def zeros(cls, in_dim, out_dim, grid=None, base="silu"):
        grid = grid or SplineGrid()
        return cls(grid, np.zeros((out_dim, in_dim, grid.num_basis)),
                   np.zeros((out_dim, in_dim)), np.zeros((out_dim, in_dim)), base)


@dataclass
class KanCache:
    layer: KanLayer
    xc: np.ndarray
    inside: np.ndarray
    bases: np.ndarray
    dbases: np.ndarray | None


def kan_forward(layer, X, need_grad=True):
    X = as_matrix(X, "X")
    if X.shape[1] != layer.in_dim:
        raise ValueError(f"KAN layer expects {layer.in_dim} inputs, got {X.shape[1]}")
    grid = layer.grid
    xc = grid.clamp(X)
    if need_grad:
        B, D = basis_and_deriv_batch(grid, xc)
    else:
        B, D = basis_batch(grid, xc), None
    N, n = X.shape
    m = layer.out_dim
    w_eff = layer.coeffs * layer.spline_w[:, :, None]
    Y = B.reshape(N, -1) @ w_eff.reshape(m, -1).T
    if layer.base == "silu":
        Y += silu(xc) @ layer.base_w.T
    inside = (X >= grid.lo) & (X <= grid.hi)
    return Y, KanCache(layer, xc, inside, B, D)


def kan_backward(layer, cache, dY):
    """Gradients of ``sum(dY * Y)``: returns ``(dX, {name: grad})``."""
    if cache.layer is not layer or cache.dbases is None:
        raise ValueError("KAN cache does not belong to this layer or was built without gradients")
    dY = as_matrix(dY, "dY")
    N, n = cache.xc.shape
    m = layer.out_dim
    if dY.shape != (N, m):
        raise ValueError(f"dY shape {dY.shape} does not match forward output {(N, m)}")
    B = cache.bases.reshape(N, -1)
    w_eff = (layer.coeffs * layer.spline_w[:, :, None]).reshape(m, -1)

    d_weff = (dY.T @ B).reshape(layer.coeffs.shape)
    d_coeffs = d_weff * layer.spline_w[:, :, None]
    d_spline_w = np.sum(d_weff * layer.coeffs, axis=2)

    dB = (dY @ w_eff).reshape(cache.bases.shape)
    dX = np.sum(dB * cache.dbases, axis=2)
    if layer.base == "silu":
        d_base_w = dY.T @ silu(cache.xc)
        dX += (dY @ layer.base_w) * silu_grad(cache.xc)
    else:
        d_base_w = np.zeros_like(layer.base_w)
    dX *= cache.inside
    return dX, {"coeffs": d_coeffs, "base_w": d_base_w, "spline_w": d_spline_w}
