"""GraphKAN and the GCN baseline as explicit forward/backward compositions.

Both networks share the same skeleton. Every hidden layer aggregates
neighbor features with the normalized adjacency, applies an update function
and then LayerNorm:

    M = aggregate(adj, H);  H' = LayerNorm(update(M))

GraphKAN uses a KAN layer as the update; the baseline uses dense + ReLU.
A head (KAN or dense, no aggregation) maps the last hidden features to
class logits.
"""

import json

import numpy as np

from .graph import NUM_CLASSES, aggregate
from .kan import KanLayer, kan_backward, kan_forward
from .numerics import as_matrix, init_params, make_rng
from .spline import SplineGrid

LN_EPS = 1e-5
MODEL_KINDS = ("graphkan", "gcn")
FULL_WIDTHS = (512, 256, 128)
DEFAULT_WIDTHS = (64, 32, 16)


# ---------------------------------------------------------------------------
# elementary layers


def layernorm_forward(gamma, beta, X, eps=LN_EPS):
    X = as_matrix(X, "X")
    if X.shape[1] != gamma.shape[0]:
        raise ValueError(f"LayerNorm over {gamma.shape[0]} features got {X.shape[1]}")
    mu = X.mean(axis=1, keepdims=True)
    var = X.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (X - mu) * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layernorm_backward(cache, dY):
    xhat, inv, gamma = cache
    dxhat = dY * gamma
    dX = inv * (dxhat - dxhat.mean(axis=1, keepdims=True)
                - xhat * np.mean(dxhat * xhat, axis=1, keepdims=True))
    return dX, np.sum(dY * xhat, axis=0), np.sum(dY, axis=0)


def relu_forward(X):
    X = np.asarray(X, dtype=np.float64)
    return np.maximum(X, 0.0), X > 0


def relu_backward(mask, dY):
    return dY * mask


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels, mask):
    """Mean softmax cross-entropy over masked nodes; returns ``(loss, dlogits)``."""
    logits = as_matrix(logits, "logits")
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("cross_entropy needs at least one masked node")
    y = np.asarray(labels)[idx]
    z = logits[idx]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.sum(np.exp(z - zmax), axis=1))
    loss = float(np.mean(lse - z[np.arange(idx.size), y]))
    p = softmax(z)
    p[np.arange(idx.size), y] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[idx] = p / idx.size
    return loss, dlogits


# ---------------------------------------------------------------------------
# update functions


class KanUpdate:
    def __init__(self, layer):
        self.layer = layer

    def params(self):
        return self.layer.params()

    def forward(self, X, need_grad=True):
        return kan_forward(self.layer, X, need_grad)

    def backward(self, cache, dY):
        return kan_backward(self.layer, cache, dY)


class DenseUpdate:
    """``X @ W + b``, optionally followed by ReLU."""

    def __init__(self, W, b, relu=True):
        self.W, self.b, self.relu = W, b, relu

    @classmethod
    def init(cls, rng, in_dim, out_dim, relu=True):
        bound = 1.0 / np.sqrt(in_dim)
        W = init_params(rng, in_dim, out_dim, "uniform", bound)
        b = init_params(rng, 1, out_dim, "uniform", bound)[0]
        return cls(W, b, relu)

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, X, need_grad=True):
        X = as_matrix(X, "X")
        if X.shape[1] != self.W.shape[0]:
            raise ValueError(f"dense layer expects {self.W.shape[0]} inputs, got {X.shape[1]}")
        Z = X @ self.W + self.b
        if not self.relu:
            return Z, (X, None)
        Y, mask = relu_forward(Z)
        return Y, (X, mask)

    def backward(self, cache, dY):
        X, mask = cache
        if mask is not None:
            dY = relu_backward(mask, dY)
        return dY @ self.W.T, {"W": X.T @ dY, "b": dY.sum(axis=0)}


class IdentityUpdate:
    def params(self):
        return {}

    def forward(self, X, need_grad=True):
        return np.array(X, dtype=np.float64), None

    def backward(self, cache, dY):
        return dY, {}


# ---------------------------------------------------------------------------
# networks


class GraphNet:
    """Message-passing stack; build with :func:`build_net`."""

    def __init__(self, kind, d_in, widths, updates, norms, head, n_classes=NUM_CLASSES,
                 concat_self=False, extra=None):
        self.kind = kind
        self.d_in = d_in
        self.widths = tuple(widths)
        self.updates = updates
        self.norms = norms  # list of (gamma, beta)
        self.head = head
        self.n_classes = n_classes
        self.concat_self = concat_self
        self.extra = dict(extra or {})

    def config(self):
        return {"kind": self.kind, "d_in": self.d_in, "widths": list(self.widths),
                "n_classes": self.n_classes, "concat_self": self.concat_self, **self.extra}

    def params(self):
        """Name -> array view of every trainable parameter (live references)."""
        out = {}
        for i, (upd, (gamma, beta)) in enumerate(zip(self.updates, self.norms)):
            for k, v in upd.params().items():
                out[f"layers.{i}.update.{k}"] = v
            out[f"layers.{i}.norm.gamma"] = gamma
            out[f"layers.{i}.norm.beta"] = beta
        for k, v in self.head.params().items():
            out[f"head.{k}"] = v
        return out

    def num_params(self):
        return int(sum(v.size for v in self.params().values()))


def build_net(kind, d_in, widths=DEFAULT_WIDTHS, n_classes=NUM_CLASSES, seed=0, grid=None,
              base="silu", concat_self=False, rng=None):
    if kind not in MODEL_KINDS:
        raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {kind!r}")
    rng = rng if rng is not None else make_rng(seed, 1)
    widths = tuple(int(w) for w in widths)
    dims = (d_in,) + widths
    updates, norms = [], []
    extra = {}
    if kind == "graphkan":
        grid = grid or SplineGrid()
        extra = {"spline": grid.to_dict(), "base": base}
    for i in range(len(widths)):
        fan_in = dims[i] * (2 if concat_self else 1)
        if kind == "graphkan":
            updates.append(KanUpdate(KanLayer.init(rng, fan_in, dims[i + 1], grid, base)))
        else:
            updates.append(DenseUpdate.init(rng, fan_in, dims[i + 1], relu=True))
        norms.append((np.ones(dims[i + 1]), np.zeros(dims[i + 1])))
    if kind == "graphkan":
        head = KanUpdate(KanLayer.init(rng, dims[-1], n_classes, grid, base))
    else:
        head = DenseUpdate.init(rng, dims[-1], n_classes, relu=False)
    return GraphNet(kind, d_in, widths, updates, norms, head, n_classes, concat_self, extra)


def forward_pass(net, adj, X, need_grad=True):
    """Returns ``(logits, per_layer_features, cache)``.

    ``per_layer_features`` are the post-LayerNorm outputs of the hidden layers.
    """
    H = as_matrix(X, "X")
    if H.shape[1] != net.d_in:
        raise ValueError(f"network expects {net.d_in} input features, got {H.shape[1]}")
    features, layer_caches = [], []
    for upd, (gamma, beta) in zip(net.updates, net.norms):
        M = aggregate(adj, H)
        U = np.hstack([H, M]) if net.concat_self else M
        Z, ucache = upd.forward(U, need_grad)
        Hn, lcache = layernorm_forward(gamma, beta, Z)
        layer_caches.append((H.shape[1], ucache, lcache))
        features.append(Hn)
        H = Hn
    logits, hcache = net.head.forward(H, need_grad)
    return logits, features, {"net": net, "adj": adj, "layers": layer_caches, "head": hcache}


def backward_pass(net, cache, dlogits):
    """Gradients for every entry of ``net.params()``, keyed identically."""
    if cache.get("net") is not net:
        raise ValueError("forward cache was produced by a different network")
    adj = cache["adj"]
    grads = {}
    dH, hg = net.head.backward(cache["head"], as_matrix(dlogits, "dlogits"))
    for k, v in hg.items():
        grads[f"head.{k}"] = v
    for i in reversed(range(len(net.updates))):
        d_prev, ucache, lcache = cache["layers"][i]
        dZ, dgamma, dbeta = layernorm_backward(lcache, dH)
        grads[f"layers.{i}.norm.gamma"] = dgamma
        grads[f"layers.{i}.norm.beta"] = dbeta
        dU, ug = net.updates[i].backward(ucache, dZ)
        for k, v in ug.items():
            grads[f"layers.{i}.update.{k}"] = v
        if net.concat_self:
            # the normalized adjacency is symmetric, so its transpose is itself
            dH = dU[:, :d_prev] + aggregate(adj, np.ascontiguousarray(dU[:, d_prev:]))
        else:
            dH = aggregate(adj, dU)
    return grads


def predict(net, adj, X):
    logits, features, _ = forward_pass(net, adj, X, need_grad=False)
    return logits, features


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(net, path, run_config=None):
    """``.npz`` archive: one array per parameter name plus a JSON header."""
    header = {"format": "graphkan-checkpoint/1", "model": net.config(), "run_config": run_config or {},
              "shapes": {k: list(v.shape) for k, v in net.params().items()}}
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in net.params().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        cfg = header["model"]
        grid = None
        if cfg["kind"] == "graphkan":
            s = cfg["spline"]
            grid = SplineGrid(s["degree"], s["num_intervals"], *s["domain"])
        net = build_net(cfg["kind"], cfg["d_in"], cfg["widths"], cfg["n_classes"], grid=grid,
                        base=cfg.get("base", "silu"), concat_self=cfg["concat_self"])
        for name, arr in net.params().items():
            if name not in data:
                raise ValueError(f"checkpoint is missing parameter {name!r}")
            stored = data[name]
            if stored.shape != arr.shape:
                raise ValueError(f"parameter {name!r} has shape {stored.shape}, expected {arr.shape}")
            arr[...] = stored
    return net, header
