"""Adam, cosine annealing, the per-trial training loop and the multi-trial
experiment runner."""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import normalize, split_validation
from .metrics import accuracy, silhouette_report
from .model import DEFAULT_WIDTHS, MODEL_KINDS, backward_pass, build_net, cross_entropy, forward_pass
from .numerics import make_rng
from .spline import SplineGrid

log = logging.getLogger(__name__)

# substream ids derived from a trial seed
SPLIT_STREAM = 0
INIT_STREAM = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, message):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 200
    lr_max: float = 1e-2
    lr_min: float = 1e-4
    seed: int = 0
    trials: int = 10
    val_fraction: float = 0.2
    model_kind: str = "graphkan"
    widths: tuple = DEFAULT_WIDTHS
    spline_degree: int = 3
    spline_grid: int = 5
    spline_domain: tuple = (-2.0, 2.0)
    self_loops: bool = True
    base: str = "silu"
    concat_self: bool = False
    workers: int = 1

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.spline_domain = tuple(float(v) for v in self.spline_domain)
        self.validate()

    def validate(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError("need 0 < lr_min <= lr_max")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        if not self.widths or min(self.widths) < 1:
            raise ValueError("widths must be positive")
        if self.base not in ("silu", "none"):
            raise ValueError("base must be 'silu' or 'none'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid(self):
        return SplineGrid(self.spline_degree, self.spline_grid, *self.spline_domain)

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["spline_domain"] = list(self.spline_domain)
        return d


def cosine_lr(cfg, epoch):
    """Cosine annealing from ``lr_max`` at epoch 0 to ``lr_min`` at ``cfg.epochs``."""
    if cfg.epochs == 0:
        return cfg.lr_max
    if not 0 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    if epoch == cfg.epochs:
        return cfg.lr_min
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + math.cos(math.pi * epoch / cfg.epochs))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, lr):
    """In-place Adam update of every array in ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


@dataclass
class TrialResult:
    model_kind: str
    trial: int
    seed: int
    status: str = "ok"
    best_epoch: int = -1
    best_val_acc: float = float("nan")
    test_acc: float = float("nan")
    wall_time_seconds: float = 0.0
    silhouette: list = field(default_factory=list)
    loss_curve: list = field(default_factory=list)
    val_curve: list = field(default_factory=list)
    error: str = ""
    failed_epoch: int = -1
    # large per-node outputs; not serialized into reports
    test_features: list = field(default_factory=list, repr=False)
    test_nodes: np.ndarray | None = field(default=None, repr=False)
    best_params: dict | None = field(default=None, repr=False)

    @property
    def ok(self):
        return self.status == "ok"

    def to_dict(self, timing=True):
        d = {
            "model": self.model_kind, "trial": self.trial, "seed": self.seed, "status": self.status,
            "best_epoch": self.best_epoch, "best_val_acc": self.best_val_acc, "test_acc": self.test_acc,
            "silhouette": self.silhouette, "loss_curve": self.loss_curve, "val_curve": self.val_curve,
        }
        if self.status != "ok":
            d["error"] = self.error
            d["failed_epoch"] = self.failed_epoch
        if timing:
            d["wall_time_seconds"] = self.wall_time_seconds
        return d


def train_trial(cfg, graph, seed, adj=None, keep_params=False, kind=None):
    """Train one model on a graph that already carries train/val/test masks.

    The reported test accuracy and features come from the epoch with the
    highest validation accuracy (earliest on ties). Epoch ``e`` evaluates the
    parameters after ``e`` updates, so ``epochs=0`` scores the untrained net.
    """
    kind = kind or cfg.model_kind
    adj = adj if adj is not None else normalize(graph, cfg.self_loops)
    net = build_net(kind, graph.d_in, cfg.widths, seed=seed, grid=cfg.grid(), base=cfg.base,
                    concat_self=cfg.concat_self, rng=make_rng(seed, INIT_STREAM))
    params = net.params()
    state = AdamState()
    X, y = graph.features, graph.labels
    train, val, test = graph.train_mask, graph.val_mask, graph.test_mask
    select = val if val.any() else train
    result = TrialResult(kind, -1, int(seed))
    best = -1.0
    best_feats = None

    t0 = time.perf_counter()
    try:
        for epoch in range(cfg.epochs + 1):
            last = epoch == cfg.epochs
            logits, feats, cache = forward_pass(net, adj, X, need_grad=not last)
            val_acc = accuracy(logits, y, select)
            result.val_curve.append(val_acc)
            if val_acc > best:
                best = val_acc
                result.best_epoch = epoch
                result.best_val_acc = val_acc
                result.test_acc = accuracy(logits, y, test) if test.any() else float("nan")
                best_feats = feats
                if keep_params:
                    result.best_params = {k: v.copy() for k, v in params.items()}
            if last:
                break
            loss, dlogits = cross_entropy(logits, y, train)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, "non-finite training loss")
            result.loss_curve.append(loss)
            grads = backward_pass(net, cache, dlogits)
            try:
                adam_step(state, params, grads, cosine_lr(cfg, epoch))
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, str(exc)) from exc
    except TrainingDiverged as exc:
        result.status = "failed"
        result.error = str(exc)
        result.failed_epoch = exc.epoch
        log.warning("%s trial with seed %d diverged: %s", kind, seed, exc)
    result.wall_time_seconds = time.perf_counter() - t0

    if result.ok and test.any():
        result.test_nodes = np.flatnonzero(test)
        result.test_features = [f[test] for f in best_feats]
        labels = y[test]
        if np.unique(labels).size >= 2:
            result.silhouette = [silhouette_report(f, labels).score for f in result.test_features]
    return result


def warmup():
    """Compile the numba kernels so the first timed trial does not pay for it."""
    from .gradcheck import toy_graph

    g = toy_graph(make_rng(0))
    adj = normalize(g)
    for kind in MODEL_KINDS:
        net = build_net(kind, g.d_in, (4,), n_classes=3)
        logits, _, cache = forward_pass(net, adj, g.features)
        backward_pass(net, cache, cross_entropy(logits, g.labels, g.train_mask)[1])
    silhouette_report(g.features, g.labels)


def _trial_job(args):
    cfg, graph, adj, kind, trial, seed = args
    split = split_validation(graph, cfg.val_fraction, make_rng(seed, SPLIT_STREAM))
    res = train_trial(cfg, split, seed, adj=adj, kind=kind)
    res.trial = trial
    return res


def _mean_std(values):
    if not values:
        return float("nan"), float("nan")
    a = np.array(values, dtype=np.float64)
    return math.fsum(a) / a.size, float(np.sqrt(math.fsum((a - math.fsum(a) / a.size) ** 2) / a.size))


@dataclass
class ModelSummary:
    model: str
    n_ok: int
    n_failed: int
    acc_mean: float
    acc_std: float
    time_mean: float
    time_std: float
    silhouette_mean: list

    def to_dict(self, timing=True):
        d = asdict(self)
        if not timing:
            d.pop("time_mean")
            d.pop("time_std")
        return d


@dataclass
class ExperimentReport:
    config: dict
    graph_meta: dict
    workers: int
    trials: list  # TrialResult, ordered by (model, trial)
    summaries: dict  # model -> ModelSummary

    def to_dict(self, timing=True):
        return {
            "config": self.config,
            "graph": self.graph_meta,
            "workers": self.workers,
            "summary": {k: s.to_dict(timing) for k, s in self.summaries.items()},
            "trials": [t.to_dict(timing) for t in self.trials],
            "failed": [{"model": t.model_kind, "trial": t.trial, "error": t.error}
                       for t in self.trials if not t.ok],
        }

    def timing_dict(self):
        return {
            "workers": self.workers,
            "summary": {k: {"time_mean": s.time_mean, "time_std": s.time_std}
                        for k, s in self.summaries.items()},
            "trials": [{"model": t.model_kind, "trial": t.trial, "wall_time_seconds": t.wall_time_seconds}
                       for t in self.trials],
        }


def summarize(kind, results):
    ok = [r for r in sorted(results, key=lambda r: r.trial) if r.ok]
    acc = _mean_std([r.test_acc for r in ok])
    tm = _mean_std([r.wall_time_seconds for r in ok])
    sil = []
    if ok and all(r.silhouette for r in ok):
        n_layers = len(ok[0].silhouette)
        sil = [math.fsum(r.silhouette[i] for r in ok) / len(ok) for i in range(n_layers)]
    return ModelSummary(kind, len(ok), len(results) - len(ok), acc[0], acc[1], tm[0], tm[1], sil)


def run_experiment(cfg, graph, kinds=None, workers=None):
    """Run ``cfg.trials`` paired trials per model kind.

    Trial ``i`` uses seed ``cfg.seed + i`` for every kind, so both models see
    the same validation split and the same init stream.
    """
    kinds = list(kinds or [cfg.model_kind])
    workers = workers or cfg.workers
    adj = normalize(graph, cfg.self_loops)
    jobs = [(cfg, graph, adj, kind, i, cfg.seed + i) for kind in kinds for i in range(cfg.trials)]
    if workers == 1:
        warmup()
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=warmup) as pool:
            results = list(pool.map(_trial_job, jobs))
    results.sort(key=lambda r: (kinds.index(r.model_kind), r.trial))
    summaries = {k: summarize(k, [r for r in results if r.model_kind == k]) for k in kinds}
    return ExperimentReport(dict(cfg.to_dict(), models=kinds, workers=workers), dict(graph.meta), workers,
                            results, summaries)


def format_table(rows):
    """Aligned plain-text table of ``(graph, model, ModelSummary)`` rows."""
    header = ("graph", "model", "test acc (mean±std)", "wall time s", "ok/failed", "silhouette L1/L2/L3")
    lines = []
    for g, m, s in rows:
        sil = "/".join(f"{v:.3f}" for v in s.silhouette_mean) or "-"
        lines.append((str(g), m, f"{s.acc_mean:.4f}±{s.acc_std:.4f}", f"{s.time_mean:.2f}",
                      f"{s.n_ok}/{s.n_failed}", sil))
    widths = [max(len(r[i]) for r in [header] + lines) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*r) for r in lines]
    return "\n".join(out)
