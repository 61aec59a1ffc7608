"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Shapes match one training epoch on a generated BG_1 graph at widths
64-32-16: 1400 nodes, kNN edges, silhouette over the 700 test nodes.
"""

import argparse
import json
import time

import numpy as np

from graphkan import _accel
from graphkan.graph import BgConfig, aggregate, gen_bg, normalize
from graphkan.metrics import silhouette_samples
from graphkan.model import backward_pass, build_net, cross_entropy, forward_pass
from graphkan.numerics import make_rng
from graphkan.spline import SplineGrid, basis_and_deriv_batch


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def cases(g, adj):
    rng = make_rng(0)
    grid = SplineGrid()
    x = rng.uniform(-2.5, 2.5, (g.n_nodes, 64))
    H = rng.standard_normal((g.n_nodes, 64))
    feats = rng.standard_normal((700, 16))
    labels = g.labels[g.test_mask]
    nets = {k: build_net(k, g.d_in, (64, 32, 16), rng=make_rng(1)) for k in ("graphkan", "gcn")}

    def epoch(kind):
        def run():
            logits, _, cache = forward_pass(nets[kind], adj, g.features)
            backward_pass(nets[kind], cache, cross_entropy(logits, g.labels, g.train_mask)[1])
        return run

    return {
        "basis+deriv 1400x64": lambda: basis_and_deriv_batch(grid, x),
        "aggregate 1400x64": lambda: aggregate(adj, H),
        "silhouette 700x16": lambda: silhouette_samples(feats, labels),
        "epoch graphkan": epoch("graphkan"),
        "epoch gcn": epoch("gcn"),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--json")
    args = p.parse_args(argv)

    g = gen_bg(BgConfig(graph_id=1), seed=0)
    adj = normalize(g)
    backends = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]
    rows = {}
    for b in backends:
        prev = _accel.set_backend(b)
        try:
            for name, fn in cases(g, adj).items():
                rows.setdefault(name, {})[b] = best_of(fn, args.repeat)
        finally:
            _accel.set_backend(prev)

    print(f"{'kernel':<22}" + "".join(f"{b + ' ms (min/med)':>24}" for b in backends) + f"{'speedup':>10}")
    for name, r in rows.items():
        cols = "".join(f"{r[b][0] * 1e3:>12.2f}/{r[b][1] * 1e3:<11.2f}" for b in backends)
        speed = f"{r['numpy'][0] / r['numba'][0]:>9.1f}x" if len(backends) == 2 else ""
        print(f"{name:<22}{cols}{speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({k: {b: {"min_s": v[0], "median_s": v[1]} for b, v in r.items()} for k, r in rows.items()},
                      fh, indent=1)


if __name__ == "__main__":
    main()
