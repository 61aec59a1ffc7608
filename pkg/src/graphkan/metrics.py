"""Accuracy, silhouette scoring of hidden features, and feature export."""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._accel import njit


def accuracy(logits, labels, mask):
    """Fraction of masked nodes whose argmax (lowest index on ties) is correct."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("accuracy needs a non-empty mask")
    pred = np.argmax(np.asarray(logits)[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels)[mask]))


# ---------------------------------------------------------------------------
# silhouette


@njit
def _class_distance_sums_numba(X, y, n_classes):
    n, d = X.shape
    sums = np.zeros((n, n_classes))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            acc = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                acc += diff * diff
            sums[i, y[j]] += np.sqrt(acc)
    return sums


def _class_distance_sums_numpy(X, y, n_classes, block=64):
    n = X.shape[0]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    sums = np.empty((n, n_classes))
    for s in range(0, n, block):
        diff = X[s:s + block, None, :] - X[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        sums[s:s + block] = dist @ onehot
    return sums


@dataclass
class SilhouetteReport:
    score: float
    per_class: dict = field(default_factory=dict)
    n_nodes: int = 0
    flagged: list = field(default_factory=list)

    def to_dict(self):
        return {"score": self.score, "per_class": {str(k): v for k, v in self.per_class.items()},
                "n_nodes": self.n_nodes, "flagged": self.flagged}


def silhouette_samples(features, labels, backend=None):
    """Per-point silhouette values and the indices of points pinned to 0.

    Points in singleton classes, and points with ``a == b == 0``, score 0.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    classes, y = np.unique(np.asarray(labels), return_inverse=True)
    if classes.size < 2:
        raise ValueError("silhouette needs at least two classes")
    C = classes.size
    backend = backend or _accel.get_backend()
    kernel = _class_distance_sums_numba if backend == "numba" else _class_distance_sums_numpy
    sums = kernel(X, y.astype(np.int64), C)
    counts = np.bincount(y, minlength=C).astype(np.float64)
    n = X.shape[0]
    own = counts[y] - 1
    a = np.divide(sums[np.arange(n), y], own, out=np.zeros(n), where=own > 0)
    other = sums / counts
    other[np.arange(n), y] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros(n), where=denom > 0)
    singleton = own == 0
    s[singleton] = 0.0
    flagged = np.flatnonzero(singleton | (denom == 0))
    return s, flagged, classes[y]


def silhouette(features, labels, mask=None):
    return silhouette_report(features, labels, mask).score


def silhouette_report(features, labels, mask=None):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        features, labels = features[mask], labels[mask]
    s, flagged, lab = silhouette_samples(features, labels)
    per_class = {int(c): float(s[lab == c].mean()) for c in np.unique(lab)}
    return SilhouetteReport(float(s.mean()), per_class, int(s.size), [int(i) for i in flagged])


# ---------------------------------------------------------------------------
# export


def export_features(per_layer_features, labels, mask, path, node_ids=None):
    """Write one CSV per layer: ``node_id,label,f_0..f_{d-1}`` for masked nodes.

    ``path`` is a directory; files are named ``layer1.csv``, ``layer2.csv``...
    Returns the written paths.
    """
    mask = np.asarray(mask, dtype=bool)
    labels = np.asarray(labels)
    ids = np.arange(mask.size) if node_ids is None else np.asarray(node_ids)
    os.makedirs(path, exist_ok=True)
    written = []
    for li, F in enumerate(per_layer_features, start=1):
        F = np.asarray(F, dtype=np.float64)
        if F.shape[0] == mask.size:
            F = F[mask]
        if F.shape[0] != mask.sum():
            raise ValueError(f"layer {li} features have {F.shape[0]} rows for {mask.sum()} masked nodes")
        out = os.path.join(path, f"layer{li}.csv")
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "label"] + [f"f_{j}" for j in range(F.shape[1])])
            for nid, lab, row in zip(ids[mask], labels[mask], F):
                w.writerow([int(nid), int(lab)] + [repr(float(v)) for v in row])
        written.append(out)
    return written


def read_features_csv(path):
    """Inverse of one :func:`export_features` file: ``(node_ids, labels, F)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    labels = np.array([int(r[1]) for r in body], dtype=np.int64)
    F = np.array([[float(v) for v in r[2:]] for r in body], dtype=np.float64).reshape(len(body), -1)
    return ids, labels, F
