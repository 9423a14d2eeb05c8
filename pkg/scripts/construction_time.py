"""Median construction time per layout method, with Brame's phase breakdown.

    python scripts/construction_time.py --rows 200000 --repeats 3
"""

from __future__ import annotations

import argparse

from tierblocks.layout import LayoutConfig
from tierblocks.sim import bench_build
from tierblocks.synthetic import clustered_table
from tierblocks.workloadgen import GeneratorConfig, gen_representative


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--rows", type=int, default=200_000)
    p.add_argument("--dims", type=int, default=5)
    p.add_argument("--block-size", type=int, default=2048)
    p.add_argument("--page-size", type=int, default=64)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--methods", default="key-order,kdtree,curve,brame-s,brame-h")
    args = p.parse_args(argv)
    table = clustered_table(args.rows, args.dims, seed=1)
    reps = gen_representative(table, 100, GeneratorConfig(3, 5), seed=2)
    cfg = LayoutConfig(block_size=args.block_size, page_size=args.page_size)
    for row in bench_build(table, args.methods.split(","), reps, cfg, args.repeats):
        line = f"{row.method:10s} {row.seconds:8.3f}s {row.blocks:6d} blocks"
        if row.phases:
            line += "  " + " ".join(f"{k}={v / row.seconds:.0%}" for k, v in sorted(row.phases.items()))
        print(line)


if __name__ == "__main__":
    main()
