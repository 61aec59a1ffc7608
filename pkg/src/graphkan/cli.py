"""Command-line entry point: ``graphkan {gen,train,compare,gradcheck}``.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error.
Relative output paths are resolved under ``$GRAPHKAN_OUT_DIR`` when set.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from .graph import PRESETS, BgConfig, GraphFormatError, class_counts, gen_bg, read_graph, split_validation, write_graph
from .gradcheck import TOLERANCE, run_all, worst_by_component
from .metrics import export_features
from .model import build_net, save_checkpoint
from .numerics import make_rng
from .train import SPLIT_STREAM, TrainConfig, format_table, run_experiment, train_trial

log = logging.getLogger("graphkan")

OUT_DIR_ENV = "GRAPHKAN_OUT_DIR"
BG_KEYS = {f.name for f in fields(BgConfig)}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
OUTPUT_KEYS = {"out_report", "export_features", "checkpoint"}

class UsageError(Exception):
    pass


def _out_path(path):
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def load_run_config(path):
    """Flat JSON object whose keys come from BgConfig, TrainConfig and the
    output-path names; anything else is rejected."""
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - BG_KEYS - TRAIN_KEYS - OUTPUT_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _train_config(file_cfg, args):
    values = {k: v for k, v in file_cfg.items() if k in TRAIN_KEYS}
    for key in ("trials", "seed", "workers", "epochs", "widths", "lr_max"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training config: {exc}") from exc


def _dump_json(obj, path):
    with open(_out_path(path), "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _sidecar(path, suffix):
    stem, _ = os.path.splitext(path)
    return stem + suffix


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args):
    file_cfg = load_run_config(args.config)
    values = dict(PRESETS[args.preset])
    values.update({k: v for k, v in file_cfg.items() if k in BG_KEYS})
    values["graph_id"] = args.graph_id
    for flag, key in (("d_in", "d_in"), ("knn_k", "knn_k"), ("separation", "class_separation"),
                      ("noise", "noise")):
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    cfg = BgConfig(**values)
    try:
        cfg.validate()
        g = gen_bg(cfg, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_graph(g, _out_path(args.out))
    labeled, test = class_counts(cfg.graph_id)
    print(f"BG_{cfg.graph_id}: {g.n_nodes} nodes, {len(g.edges)} edges, d_in={g.d_in}")
    print("labeled per class: " + " ".join(f"{c}:{n}" for c, n in enumerate(labeled))
          + f" (total {labeled.sum()})")
    print(f"unlabeled test nodes: {int(g.test_mask.sum())}")
    return 0


def cmd_train(args):
    file_cfg = load_run_config(args.config)
    cfg = _train_config(file_cfg, args)
    out_report = args.out_report or file_cfg.get("out_report")
    if not out_report:
        raise UsageError("--out-report is required")
    try:
        g = read_graph(args.graph)
    except FileNotFoundError:
        print(f"error: graph file not found: {args.graph}", file=sys.stderr)
        return 1
    except GraphFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    kinds = args.model
    report = run_experiment(cfg, g, kinds=kinds)
    # wall-clock numbers go to a sidecar so the report itself is reproducible
    _dump_json(report.to_dict(timing=False), out_report)
    _dump_json(report.timing_dict(), _sidecar(out_report, ".timing.json"))
    gid = g.meta.get("config", {}).get("graph_id", "?")
    table = format_table([(gid, k, s) for k, s in report.summaries.items()])
    with open(_out_path(_sidecar(out_report, ".txt")), "w") as fh:
        fh.write(table + "\n")
    print(table)

    export_dir = args.export_features or file_cfg.get("export_features")
    if export_dir:
        for r in report.trials:
            if r.ok and r.trial == 0 and r.test_features:
                export_features(r.test_features, g.labels[r.test_nodes], np.ones(len(r.test_nodes), bool),
                                _out_path(os.path.join(export_dir, r.model_kind)), node_ids=r.test_nodes)
    ckpt = args.checkpoint or file_cfg.get("checkpoint")
    if ckpt:
        _save_first_trial_checkpoint(cfg, g, kinds[0], ckpt)
    return 0 if any(r.ok for r in report.trials) else 1


def _save_first_trial_checkpoint(cfg, g, kind, path):
    split = split_validation(g, cfg.val_fraction, make_rng(cfg.seed, SPLIT_STREAM))
    res = train_trial(cfg, split, cfg.seed, keep_params=True, kind=kind)
    net = build_net(kind, g.d_in, cfg.widths, grid=cfg.grid(), base=cfg.base, concat_self=cfg.concat_self)
    for name, arr in net.params().items():
        arr[...] = res.best_params[name]
    save_checkpoint(net, _out_path(path), cfg.to_dict())


def cmd_compare(args):
    file_cfg = load_run_config(args.config)
    cfg = _train_config(file_cfg, args)
    kinds = ["graphkan", "gcn"]
    rows, graphs, failed = [], [], False
    for path in args.graphs:
        try:
            g = read_graph(path)
        except (OSError, GraphFormatError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            graphs.append({"path": path, "error": str(exc)})
            failed = True
            continue
        report = run_experiment(cfg, g, kinds=kinds)
        gid = g.meta.get("config", {}).get("graph_id", os.path.basename(path))
        for k in kinds:
            rows.append((gid, k, report.summaries[k]))
            if report.summaries[k].n_ok == 0:
                failed = True
        entry = report.to_dict(timing=True)
        entry["path"] = path
        entry["graph_id"] = gid
        graphs.append(entry)
    table = format_table(rows)
    _dump_json({"config": dict(cfg.to_dict(), models=kinds), "graphs": graphs,
                "rows": [{"graph_id": g, "model": k, **s.to_dict()} for g, k, s in rows]}, args.out)
    with open(_out_path(_sidecar(args.out, ".txt")), "w") as fh:
        fh.write(table + "\n")
    print(table)
    return 1 if failed else 0


def cmd_gradcheck(args):
    widths = tuple(args.sizes) if args.sizes else (8, 8, 8)
    results = run_all(seed=args.seed, widths=widths)
    worst = worst_by_component(results)
    ok = True
    for comp, r in worst.items():
        passed = r.passed(args.tolerance)
        ok &= passed
        status = "ok" if passed else "FAIL"
        print(f"{comp:<24} worst {r.kind} err {r.error:.3e} ({r.param})  {status}")
    for r in results:
        if not r.passed(args.tolerance):
            print(f"failed: {r.component} {r.param} err={r.error:.3e}", file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="graphkan", description="GraphKAN vs GCN node classification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic basic graph")
    g.add_argument("--graph-id", type=int, choices=[1, 2, 3, 4], required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--preset", choices=sorted(PRESETS), default="hard")
    g.add_argument("--config")
    g.add_argument("--d-in", type=int)
    g.add_argument("--knn-k", type=int)
    g.add_argument("--separation", type=float)
    g.add_argument("--noise", type=float)
    g.set_defaults(func=cmd_gen)

    def train_flags(sp):
        sp.add_argument("--config")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--lr-max", type=float)
        sp.add_argument("--widths", type=int, nargs="+")

    t = sub.add_parser("train", help="run repeated training trials on one graph")
    t.add_argument("--graph", required=True)
    t.add_argument("--model", nargs="+", choices=["graphkan", "gcn"], default=["graphkan"])
    t.add_argument("--out-report")
    t.add_argument("--export-features")
    t.add_argument("--checkpoint")
    train_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="paired GraphKAN vs GCN comparison over graphs")
    c.add_argument("--graphs", nargs="+", required=True)
    c.add_argument("--out", required=True)
    train_flags(c)
    c.set_defaults(func=cmd_compare)

    gc = sub.add_parser("gradcheck", help="finite-difference check of all backward passes")
    gc.add_argument("--sizes", type=int, nargs="+", help="hidden widths for the whole-model check")
    gc.add_argument("--tolerance", type=float, default=TOLERANCE)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"graphkan: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"graphkan: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
