import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphkan.metrics import accuracy, export_features, read_features_csv, silhouette, silhouette_report


def naive_silhouette(X, y):
    # direct transcription of the definition, one point at a time
    n = len(y)
    scores = []
    for i in range(n):
        dists = {}
        for j in range(n):
            if i == j:
                continue
            d = sum((X[i][k] - X[j][k]) ** 2 for k in range(len(X[i]))) ** 0.5
            dists.setdefault(y[j], []).append(d)
        if y[i] not in dists:
            scores.append(0.0)
            continue
        a = sum(dists[y[i]]) / len(dists[y[i]])
        b = min(sum(v) / len(v) for c, v in dists.items() if c != y[i])
        scores.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(scores) / n


def test_accuracy_basic():
    labels = np.array([0, 1, 2, 1])
    onehot = np.eye(3)[labels]
    mask = np.ones(4, bool)
    assert accuracy(onehot, labels, mask) == 1.0
    assert accuracy(np.eye(3)[(labels + 1) % 3], labels, mask) == 0.0
    assert accuracy(np.zeros((4, 3)), np.array([0, 0, 1, 2]), mask) == 0.5  # ties -> class 0
    with pytest.raises(ValueError):
        accuracy(onehot, labels, np.zeros(4, bool))


def test_accuracy_random_logits(rng):
    n = 7000
    acc = accuracy(rng.standard_normal((n, 6)), rng.integers(0, 6, n), np.ones(n, bool))
    assert abs(acc - 1 / 6) < 0.02


def test_accuracy_shift_invariant(rng):
    logits = rng.standard_normal((50, 6))
    labels = rng.integers(0, 6, 50)
    mask = rng.random(50) < 0.5
    shifted = logits + rng.standard_normal((50, 1)) * 10
    assert accuracy(logits, labels, mask) == accuracy(shifted, labels, mask)


def test_silhouette_well_separated(rng):
    X = np.vstack([rng.normal(0, 0.1, (10, 3)), rng.normal(0, 0.1, (10, 3)) + [100, 0, 0]])
    y = np.repeat([0, 1], 10)
    assert silhouette(X, y) > 0.99


def test_silhouette_identical_points():
    rep = silhouette_report(np.ones((6, 2)), np.array([0, 0, 0, 1, 1, 1]))
    assert rep.score == 0.0 and len(rep.flagged) == 6


def test_silhouette_singleton_flagged(rng):
    X = rng.standard_normal((7, 2))
    y = np.array([0, 0, 0, 1, 1, 1, 2])
    rep = silhouette_report(X, y)
    assert 6 in rep.flagged
    assert abs(rep.score - naive_silhouette(X.tolist(), y.tolist())) < 1e-12


def test_silhouette_needs_two_classes():
    with pytest.raises(ValueError):
        silhouette(np.ones((3, 2)), np.zeros(3, int))


def test_silhouette_matches_naive(rng, backend):
    for _ in range(5):
        X = rng.standard_normal((30, 4))
        y = rng.integers(0, 3, 30)
        assert abs(silhouette(X, y) - naive_silhouette(X.tolist(), y.tolist())) < 1e-12
    mask = rng.random(30) < 0.6
    assert abs(silhouette(X, y, mask) - naive_silhouette(X[mask].tolist(), y[mask].tolist())) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
def test_silhouette_rigid_and_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 4))
    y = rng.integers(0, 3, 25)
    y[:3] = [0, 1, 2]
    base = silhouette(X, y)
    R, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    moved = X @ R.T + rng.standard_normal(4) * 5
    assert abs(silhouette(moved, y) - base) < 1e-9
    assert abs(silhouette(X * scale, y) - base) < 1e-9


def test_export_features_roundtrip(tmp_path, rng):
    n = 900
    mask = np.zeros(n, bool)
    mask[rng.choice(n, 700, replace=False)] = True
    labels = rng.integers(0, 6, n)
    feats = [rng.standard_normal((n, 64)), rng.standard_normal((n, 32)), rng.standard_normal((n, 128))]
    paths = export_features(feats, labels, mask, tmp_path / "out")
    assert [p.rsplit("/", 1)[1] for p in paths] == ["layer1.csv", "layer2.csv", "layer3.csv"]
    ids, lab, F = read_features_csv(paths[2])
    assert F.shape == (700, 128)
    with open(paths[2]) as fh:
        assert len(fh.readline().split(",")) == 130
    np.testing.assert_array_equal(ids, np.flatnonzero(mask))
    np.testing.assert_array_equal(lab, labels[mask])
    np.testing.assert_array_equal(F, feats[2][mask])
    assert not set(ids) & set(np.flatnonzero(~mask))


def test_export_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export_features([np.ones((2, 2))], np.zeros(2, int), np.ones(2, bool), blocker / "sub")
