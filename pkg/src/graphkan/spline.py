"""Uniform-knot B-spline bases.

A :class:`SplineGrid` of degree ``k`` with ``G`` intervals on ``[a, b]`` has
``G + 2k + 1`` knots (the uniform grid extended by ``k`` steps on each side)
and ``G + k`` basis functions, which sum to one on ``[a, b]``. Inputs outside
the domain are clamped to it before evaluation.

Evaluation works per interval: for ``x`` in knot span ``s`` only bases
``s - k .. s`` are nonzero, and they come out of the triangular Cox-de Boor
scheme in one pass. The batched entry points return dense arrays with a
trailing basis axis so that the KAN layer can contract them with a matmul.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._accel import njit


@dataclass(frozen=True)
class SplineGrid:
    degree: int = 3
    num_intervals: int = 5
    lo: float = -2.0
    hi: float = 2.0
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("spline degree must be >= 0")
        if self.num_intervals < 1:
            raise ValueError("need at least one grid interval")
        if not self.lo < self.hi:
            raise ValueError(f"empty spline domain [{self.lo}, {self.hi}]")
        h = (self.hi - self.lo) / self.num_intervals
        steps = np.arange(-self.degree, self.num_intervals + self.degree + 1, dtype=np.float64)
        knots = self.lo + h * steps
        # pin the domain endpoints exactly
        knots[self.degree] = self.lo
        knots[self.degree + self.num_intervals] = self.hi
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def num_basis(self):
        return self.num_intervals + self.degree

    @property
    def step(self):
        return (self.hi - self.lo) / self.num_intervals

    def clamp(self, x):
        return np.clip(x, self.lo, self.hi)

    def to_dict(self):
        return {"degree": self.degree, "num_intervals": self.num_intervals, "domain": [self.lo, self.hi]}


# ---------------------------------------------------------------------------
# numba kernels


@njit
def _span(t, k, G, x):
    s = k + int(np.floor((x - t[k]) / (t[k + 1] - t[k])))
    if s < k:
        s = k
    if s > k + G - 1:
        s = k + G - 1
    while s > k and x < t[s]:
        s -= 1
    while s < k + G - 1 and x >= t[s + 1]:
        s += 1
    return s


@njit
def _local_basis(t, k, s, x, out, prev):
    # out[0..k] <- degree-k bases s-k..s ; prev[0..k-1] <- degree k-1 bases s-k+1..s
    out[0] = 1.0
    for j in range(1, k + 1):
        if j == k:
            for r in range(k):
                prev[r] = out[r]
        saved = 0.0
        for r in range(j):
            right = t[s + r + 1] - x
            left = x - t[s + 1 + r - j]
            temp = out[r] / (right + left)
            out[r] = saved + right * temp
            saved = left * temp
        out[j] = saved


@njit
def _basis_kernel_numba(t, k, G, lo, hi, x, want_deriv):
    m = x.size
    nb = G + k
    B = np.zeros((m, nb))
    D = np.zeros((m, nb))
    out = np.empty(k + 1)
    prev = np.empty(k + 1)
    for p in range(m):
        xv = x[p]
        if xv < lo:
            xv = lo
        elif xv > hi:
            xv = hi
        s = _span(t, k, G, xv)
        _local_basis(t, k, s, xv, out, prev)
        for r in range(k + 1):
            B[p, s - k + r] = out[r]
        if want_deriv and k > 0:
            for r in range(k + 1):
                i = s - k + r
                d = 0.0
                if r >= 1:
                    d += k / (t[i + k] - t[i]) * prev[r - 1]
                if r < k:
                    d -= k / (t[i + k + 1] - t[i + 1]) * prev[r]
                D[p, i] = d
    return B, D


# ---------------------------------------------------------------------------
# numpy twins


def _span_numpy(t, k, G, x):
    s = k + np.floor((x - t[k]) / (t[k + 1] - t[k])).astype(np.int64)
    s = np.clip(s, k, k + G - 1)
    # correct floor() rounding against the actual knots
    s = np.where((s > k) & (x < t[s]), s - 1, s)
    s = np.where((s < k + G - 1) & (x >= t[np.minimum(s + 1, t.size - 1)]), s + 1, s)
    return s


def _basis_kernel_numpy(t, k, G, lo, hi, x, want_deriv):
    x = np.clip(x, lo, hi)
    m = x.size
    nb = G + k
    s = _span_numpy(t, k, G, x)
    out = np.zeros((m, k + 1))
    out[:, 0] = 1.0
    prev = np.zeros((m, max(k, 1)))
    for j in range(1, k + 1):
        if j == k:
            prev[:, :k] = out[:, :k]
        saved = np.zeros(m)
        for r in range(j):
            right = t[s + r + 1] - x
            left = x - t[s + 1 + r - j]
            temp = out[:, r] / (right + left)
            out[:, r] = saved + right * temp
            saved = left * temp
        out[:, j] = saved
    rows = np.arange(m)[:, None]
    cols = s[:, None] - k + np.arange(k + 1)[None, :]
    B = np.zeros((m, nb))
    B[rows, cols] = out
    D = np.zeros((m, nb))
    if want_deriv and k > 0:
        i = cols
        d = np.zeros((m, k + 1))
        d[:, 1:] += k / (t[i[:, 1:] + k] - t[i[:, 1:]]) * prev[:, :k]
        d[:, :k] -= k / (t[i[:, :k] + k + 1] - t[i[:, :k] + 1]) * prev[:, :k]
        D[rows, cols] = d
    return B, D


def _evaluate(grid, x, want_deriv, backend=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    if not np.all(np.isfinite(flat)):
        raise ValueError("spline input contains non-finite values")
    backend = backend or _accel.get_backend()
    kernel = _basis_kernel_numba if backend == "numba" else _basis_kernel_numpy
    B, D = kernel(grid.knots, grid.degree, grid.num_intervals, grid.lo, grid.hi, flat, want_deriv)
    shape = x.shape + (grid.num_basis,)
    return B.reshape(shape), D.reshape(shape)


def basis(grid, x):
    """Values of all ``G + k`` bases at scalar ``x``."""
    return _evaluate(grid, np.array([x], dtype=np.float64), False)[0][0]


def basis_deriv(grid, x):
    """d/dx of every basis at ``x``; at clamped points the one-sided
    derivative from inside the domain."""
    return _evaluate(grid, np.array([x], dtype=np.float64), True)[1][0]


def basis_batch(grid, x, backend=None):
    """Bases for an array of inputs; result shape ``x.shape + (G + k,)``."""
    return _evaluate(grid, x, False, backend)[0]


def basis_and_deriv_batch(grid, x, backend=None):
    return _evaluate(grid, x, True, backend)
