"""Graphs, symmetric-normalized aggregation and the synthetic BG benchmarks."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from ._accel import njit
from .numerics import as_matrix, make_rng

log = logging.getLogger(__name__)

NUM_CLASSES = 6
NUM_TEST = 700
# labeled budget per graph id: (label 0 count, count for each of labels 1-5)
LABEL_BUDGETS = {1: (200, 100), 2: (200, 80), 3: (200, 60), 4: (200, 40)}
UNLABELED = -1


class GraphFormatError(ValueError):
    """Malformed graph file; the message names the offending line or field."""


@dataclass(eq=False)
class Graph:
    n_nodes: int
    edges: np.ndarray  # (E, 2) int64, u < w, lexicographically sorted
    features: np.ndarray  # (n_nodes, d_in)
    labels: np.ndarray  # int64, UNLABELED where unknown
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = canonical_edges(self.edges, self.n_nodes)
        self.features = as_matrix(self.features, "features")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        for name in ("train_mask", "val_mask", "test_mask"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=bool))
        self.validate()

    @property
    def d_in(self):
        return self.features.shape[1]

    def validate(self):
        n = self.n_nodes
        if self.features.shape[0] != n:
            raise ValueError(f"features has {self.features.shape[0]} rows for {n} nodes")
        for name in ("labels", "train_mask", "val_mask", "test_mask"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if np.any(self.train_mask & self.val_mask) or np.any(self.train_mask & self.test_mask) \
                or np.any(self.val_mask & self.test_mask):
            raise ValueError("train/val/test masks overlap")
        if np.any(self.labels[self.train_mask | self.val_mask] == UNLABELED):
            raise ValueError("every train/val node needs a label")
        if np.any(self.labels < UNLABELED):
            raise ValueError("labels must be class ids >= 0 or unlabeled")

    def equals(self, other):
        return (self.n_nodes == other.n_nodes
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.train_mask, other.train_mask)
                and np.array_equal(self.val_mask, other.val_mask)
                and np.array_equal(self.test_mask, other.test_mask)
                and self.meta == other.meta)

    def permuted(self, perm):
        """Relabel node ``v`` as ``perm[v]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return Graph(self.n_nodes, perm[self.edges], self.features[inv], self.labels[inv],
                     self.train_mask[inv], self.val_mask[inv], self.test_mask[inv], dict(self.meta))


def canonical_edges(edges, n_nodes):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n_nodes):
        bad = int(np.flatnonzero((e < 0).any(1) | (e >= n_nodes).any(1))[0])
        raise ValueError(f"edge {bad} {tuple(e[bad])} has an endpoint outside [0, {n_nodes})")
    if np.any(e[:, 0] == e[:, 1]):
        bad = int(np.flatnonzero(e[:, 0] == e[:, 1])[0])
        raise ValueError(f"edge {bad} is a self-edge on node {e[bad, 0]}")
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0) if e.size else e


# ---------------------------------------------------------------------------
# normalized adjacency


@dataclass(frozen=True, eq=False)
class NormAdjacency:
    """CSR neighbor lists with coefficients ``(deg(v) deg(w)) ** -0.5``."""
    n_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    coeffs: np.ndarray
    degrees: np.ndarray
    self_loops: bool

    def coeff(self, v, w):
        lo, hi = self.indptr[v], self.indptr[v + 1]
        hit = np.flatnonzero(self.indices[lo:hi] == w)
        return float(self.coeffs[lo + hit[0]]) if hit.size else 0.0

    def dense(self):
        A = np.zeros((self.n_nodes, self.n_nodes))
        rows = np.repeat(np.arange(self.n_nodes), np.diff(self.indptr))
        A[rows, self.indices] = self.coeffs
        return A


def normalize(g, self_loops=True):
    n = g.n_nodes
    e = g.edges
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    if self_loops:
        rows = np.concatenate([rows, np.arange(n)])
        cols = np.concatenate([cols, np.arange(n)])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    if np.any(deg == 0):
        raise ValueError(f"node {int(np.flatnonzero(deg == 0)[0])} is isolated; "
                         "normalization needs self_loops=True")
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    coeffs = 1.0 / np.sqrt(deg[rows] * deg[cols])
    return NormAdjacency(n, indptr, cols.astype(np.int64), coeffs, deg, self_loops)


@njit
def _aggregate_numba(indptr, indices, coeffs, H):
    n, d = H.shape
    out = np.zeros((n, d))
    for v in range(n):
        for p in range(indptr[v], indptr[v + 1]):
            w = indices[p]
            c = coeffs[p]
            for j in range(d):
                out[v, j] += c * H[w, j]
    return out


def _aggregate_numpy(indptr, indices, coeffs, H):
    contrib = coeffs[:, None] * H[indices]
    out = np.zeros_like(H)
    nonempty = indptr[:-1] < indptr[1:]
    if contrib.shape[0]:
        out[nonempty] = np.add.reduceat(contrib, indptr[:-1][nonempty], axis=0)
    return out


def aggregate(adj, H, backend=None):
    """Message for every node: sum of normalized neighbor rows of ``H``."""
    H = np.ascontiguousarray(as_matrix(H, "H"))
    if H.shape[0] != adj.n_nodes:
        raise ValueError(f"H has {H.shape[0]} rows for {adj.n_nodes} nodes")
    backend = backend or _accel.get_backend()
    kernel = _aggregate_numba if backend == "numba" else _aggregate_numpy
    return kernel(adj.indptr, adj.indices, adj.coeffs, H)


# ---------------------------------------------------------------------------
# synthetic basic graphs


# tone frequencies, in cycles per window
TONES = (4.0, 9.0)

# The default benchmark is the hard-noise regime.
HARD_SEPARATION = 0.8
HARD_NOISE = 1.5
MODERATE_NOISE = 0.7


@dataclass
class BgConfig:
    graph_id: int = 1
    d_in: int = 64
    class_separation: float = HARD_SEPARATION
    knn_k: int = 8
    noise: float = HARD_NOISE

    def validate(self):
        if self.graph_id not in LABEL_BUDGETS:
            raise ValueError(f"graph_id must be one of {sorted(LABEL_BUDGETS)}, got {self.graph_id}")
        if self.d_in < 4:
            raise ValueError("d_in must be >= 4")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.noise < 0 or self.class_separation < 0:
            raise ValueError("noise and class_separation must be non-negative")


PRESETS = {
    "hard": {"class_separation": HARD_SEPARATION, "noise": HARD_NOISE},
    "moderate": {"class_separation": HARD_SEPARATION, "noise": MODERATE_NOISE},
}


def class_counts(graph_id):
    """Per-class (labeled, test) node counts for a BG id."""
    first, rest = LABEL_BUDGETS[graph_id]
    labeled = np.array([first] + [rest] * (NUM_CLASSES - 1))
    test = np.full(NUM_CLASSES, NUM_TEST // NUM_CLASSES)
    test[: NUM_TEST % NUM_CLASSES] += 1
    return labeled, test


def _signals(rng, labels, d_in, separation, noise):
    # Each sample is a two-tone vibration-like window with random phases. All
    # classes share the tone frequencies; the class sets the amplitude, so it
    # is carried by signal energy, a nonlinear function of the raw samples.
    n = labels.size
    t = np.arange(d_in) / d_in
    amp = 1.0 + separation * labels.astype(np.float64)
    ph1 = rng.uniform(0, 2 * np.pi, n)
    ph2 = rng.uniform(0, 2 * np.pi, n)
    x = amp[:, None] * (np.sin(2 * np.pi * TONES[0] * t + ph1[:, None])
                        + 0.5 * np.sin(2 * np.pi * TONES[1] * t + ph2[:, None]))
    x += noise * rng.standard_normal((n, d_in))
    return x


def _knn_edges(X, k):
    n = X.shape[0]
    sq = np.sum(X * X, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(dist, np.inf)
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    return np.stack([rows, nbrs.reshape(-1)], axis=1)


def gen_bg(cfg, seed):
    """Synthetic basic graph with Table-style label budgets and kNN edges."""
    cfg.validate()
    labeled, test = class_counts(cfg.graph_id)
    n = int(labeled.sum() + test.sum())
    if cfg.knn_k >= n:
        raise ValueError(f"knn_k={cfg.knn_k} must be smaller than n_nodes={n}")
    rng = make_rng(seed, cfg.graph_id)
    labels = np.concatenate([np.repeat(np.arange(NUM_CLASSES), labeled),
                             np.repeat(np.arange(NUM_CLASSES), test)])
    is_test = np.concatenate([np.zeros(labeled.sum(), bool), np.ones(test.sum(), bool)])
    perm = rng.permutation(n)
    labels, is_test = labels[perm], is_test[perm]
    X = _signals(rng, labels, cfg.d_in, cfg.class_separation, cfg.noise)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    edges = _knn_edges(X, cfg.knn_k)
    meta = {"generator": "bg", "config": asdict(cfg), "seed": int(seed)}
    return Graph(n, edges, X, labels, ~is_test, np.zeros(n, bool), is_test, meta)


def split_validation(g, fraction=0.2, rng=None):
    """Move ``floor(fraction * count)`` labeled nodes of each class to validation."""
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    if g.val_mask.any():
        raise ValueError("graph already has a validation split")
    labeled = g.train_mask
    if not labeled.any():
        raise ValueError("graph has no labeled nodes to split")
    rng = rng if rng is not None else make_rng(0)
    val = np.zeros(g.n_nodes, bool)
    for c in np.unique(g.labels[labeled]):
        members = np.flatnonzero(labeled & (g.labels == c))
        if members.size < 2:
            log.warning("class %d has %d labeled node(s); kept entirely in train", c, members.size)
            continue
        k = math.floor(fraction * members.size)
        val[rng.choice(members, size=k, replace=False)] = True
    meta = dict(g.meta, val_fraction=fraction)
    return Graph(g.n_nodes, g.edges, g.features, g.labels, labeled & ~val, val, g.test_mask, meta)


# ---------------------------------------------------------------------------
# file I/O


def graph_to_dict(g):
    return {
        "n_nodes": int(g.n_nodes),
        "d_in": int(g.d_in),
        "features": g.features.tolist(),
        "edges": g.edges.tolist(),
        "labels": [None if y == UNLABELED else int(y) for y in g.labels],
        "train_mask": g.train_mask.tolist(),
        "val_mask": g.val_mask.tolist(),
        "test_mask": g.test_mask.tolist(),
        "meta": g.meta,
    }


def write_graph(g, path):
    # json emits repr() floats, which round-trip float64 exactly
    with open(path, "w") as fh:
        json.dump(graph_to_dict(g), fh, separators=(",", ":"))
        fh.write("\n")


def _field(doc, key, kind):
    if key not in doc:
        raise GraphFormatError(f"missing field {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool) and kind is int:
        raise GraphFormatError(f"field {key!r} must be {kind.__name__}, got {type(val).__name__}")
    return val


def graph_from_dict(doc):
    if not isinstance(doc, dict):
        raise GraphFormatError("top level must be a JSON object")
    n = _field(doc, "n_nodes", int)
    d = _field(doc, "d_in", int)
    if n < 1:
        raise GraphFormatError("field 'n_nodes' must be >= 1")
    feats = _field(doc, "features", list)
    if len(feats) != n:
        raise GraphFormatError(f"field 'features' has {len(feats)} rows, expected {n}")
    for i, row in enumerate(feats):
        if not isinstance(row, list) or len(row) != d:
            raise GraphFormatError(f"features[{i}] must be a list of {d} numbers")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row):
            raise GraphFormatError(f"features[{i}] contains a non-numeric entry")
    edges = _field(doc, "edges", list)
    for i, e in enumerate(edges):
        if (not isinstance(e, list) or len(e) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) for v in e)):
            raise GraphFormatError(f"edges[{i}] must be a pair of integers, got {e!r}")
        if not (0 <= e[0] < n and 0 <= e[1] < n):
            raise GraphFormatError(f"edges[{i}] = {e} has an endpoint outside [0, {n})")
        if e[0] == e[1]:
            raise GraphFormatError(f"edges[{i}] = {e} is a self-edge")
    labels = _field(doc, "labels", list)
    if len(labels) != n:
        raise GraphFormatError(f"field 'labels' has {len(labels)} entries, expected {n}")
    for i, y in enumerate(labels):
        if y is not None and (isinstance(y, bool) or not isinstance(y, int) or y < 0):
            raise GraphFormatError(f"labels[{i}] must be a non-negative int or null, got {y!r}")
    masks = {}
    for key in ("train_mask", "val_mask", "test_mask"):
        m = _field(doc, key, list)
        if len(m) != n or not all(isinstance(v, bool) for v in m):
            raise GraphFormatError(f"field {key!r} must be {n} booleans")
        masks[key] = np.array(m, dtype=bool)
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise GraphFormatError("field 'meta' must be an object")
    X = np.array(feats, dtype=np.float64).reshape(n, d)
    y = np.array([UNLABELED if v is None else v for v in labels], dtype=np.int64)
    try:
        return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), X, y, meta=meta, **masks)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from exc


def read_graph(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return graph_from_dict(doc)
    except GraphFormatError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc
