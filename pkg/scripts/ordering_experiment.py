"""Tuple hit rate of every layout method on a clustered synthetic table.

Runs the cloud-edge task over edge budgets and, with --three-tier, the
cloud-edge-device task over end-cache capacities. Several --seeds shift the
table, workload and noise seeds together so results can be compared across
realizations.

    python scripts/ordering_experiment.py --rows 200000 --seeds 0,10,20 --three-tier
"""

from __future__ import annotations

import argparse
import time

from tierblocks.layout import LayoutConfig, build_layout
from tierblocks.sim import SimConfig, run_cloud_edge, run_three_tier
from tierblocks.synthetic import clustered_table
from tierblocks.workloadgen import GeneratorConfig, assemble, gen_arrival_curves, gen_representative


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--rows", type=int, default=200_000)
    p.add_argument("--dims", type=int, default=5)
    p.add_argument("--block-size", type=int, default=2048)
    p.add_argument("--page-size", type=int, default=64)
    p.add_argument("--freq-limit", type=int, default=1)
    p.add_argument("--predicates", type=int, nargs=2, default=(3, 5), metavar=("MIN", "MAX"))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--intervals", type=int, default=40)
    p.add_argument("--skew", type=float, default=0.05)
    p.add_argument("--methods", default="brame-s,brame-h,key-order,kdtree,curve")
    p.add_argument("--budgets", default="0.04,0.08,0.16,0.32")
    p.add_argument("--capacities", default="0.01,0.02,0.04,0.08")
    p.add_argument("--policy", default="lru")
    p.add_argument("--seeds", default="0")
    p.add_argument("--three-tier", action="store_true")
    return p.parse_args(argv)


def floats(text):
    return tuple(float(x) for x in text.split(","))


def main(argv=None):
    args = parse_args(argv)
    budgets, capacities = floats(args.budgets), floats(args.capacities)
    cfg = LayoutConfig(block_size=args.block_size, page_size=args.page_size, freq_limit=args.freq_limit)
    sim = SimConfig(policy=args.policy)
    for s in (int(x) for x in args.seeds.split(",")):
        table = clustered_table(args.rows, args.dims, seed=1 + s)
        gcfg = GeneratorConfig(args.predicates[0], args.predicates[1])
        reps = gen_representative(table, args.reps, gcfg, seed=2 + s)
        curves = gen_arrival_curves(reps, args.intervals, 0.5, seed=3 + s, rate_scale=1.0)
        train, test = assemble(reps, curves, args.skew, seed=4 + s)
        print(f"seed {s}: {table.n} rows, {len(train)} train / {len(test)} test queries")
        print(f"  {'method':10s} {'build':>7s}  cloud-edge THR @ {args.budgets}"
              + (f"  | three-tier THR @ {args.capacities}" if args.three_tier else ""))
        for method in args.methods.split(","):
            t0 = time.perf_counter()
            layout = build_layout(table, method, reps, cfg, seed=0)
            build = time.perf_counter() - t0
            ce = run_cloud_edge(layout, train, test, budgets, sim)[1]
            line = f"  {method:10s} {build:6.1f}s  " + " ".join(f"{r.thr:.3f}" for r in ce)
            if args.three_tier:
                tt = run_three_tier(layout, train, test, capacities, sim)[1]
                line += "  | " + " ".join(f"{r.thr:.3f}" for r in tt)
            print(line, flush=True)


if __name__ == "__main__":
    main()
