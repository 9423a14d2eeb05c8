"""Build a routing forest for any block-generation method."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import baselines
from .core import Query, Table
from .partition import PartitionConfig, PartitionOutput, partition_table
from .reorg import ReorgConfig, hbc
from .router import DEFAULT_LEAF_SCAN_THRESHOLD, RoutingForest
from .spatial import Tree

METHODS = ("brame-h", "brame-s", "key-order", "kdtree", "curve", "tuple")


@dataclass
class LayoutConfig:
    block_size: int = 2048
    page_size: int | None = None
    freq_limit: int = 1
    size_threshold: int = 2
    max_subtable: int = 4096
    hard_k: int | None = None
    phi: float = 1.0
    k_max: int = 16
    fanout_target: int = 8
    skew_tau: float = 0.9
    max_iter: int = 25
    hilbert_order: int | None = None
    tuple_max: int = baselines.TUPLE_BASELINE_MAX
    leaf_scan_threshold: int = DEFAULT_LEAF_SCAN_THRESHOLD
    workers: int = 1

    def reorg(self) -> ReorgConfig:
        return ReorgConfig(self.phi, self.max_iter, self.fanout_target, self.k_max, self.skew_tau)

    def partition(self, mode: str) -> PartitionConfig:
        page_size = self.page_size or max(1, self.block_size // 4)
        return PartitionConfig(page_size, self.freq_limit, self.size_threshold, mode,
                               self.max_subtable, self.hard_k, self.reorg())


@dataclass
class Layout:
    method: str
    forest: RoutingForest
    timings: dict[str, float] = field(default_factory=dict)
    partition: PartitionOutput | None = None

    @property
    def total_time(self) -> float:
        return self.timings.get("total", 0.0)


def _hbc_job(args):
    values, rows, reps, block_size, cfg, seed, tree_id = args
    return hbc(values, rows, reps, block_size, cfg, seed, tree_id)


def build_hot_trees(table: Table, subtables: Sequence[np.ndarray], reps: Sequence[Query], block_size: int,
                    cfg: ReorgConfig, seed: int, workers: int = 1) -> list[Tree]:
    jobs = [(table.values, rows, list(reps), block_size, cfg, seed + 104729 * i, i)
            for i, rows in enumerate(subtables)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_hbc_job, jobs))
    return [_hbc_job(j) for j in jobs]


def build_layout(table: Table, method: str, reps: Sequence[Query], cfg: LayoutConfig | None = None,
                 seed: int = 0) -> Layout:
    cfg = cfg or LayoutConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    timings: dict[str, float] = {}
    part = None
    t_start = time.perf_counter()
    if method in ("brame-h", "brame-s"):
        mode = "hard" if method == "brame-h" else "soft"
        part = partition_table(table, reps, cfg.block_size, cfg.partition(mode), seed)
        timings.update(part.timings)
        t0 = time.perf_counter()
        hot = build_hot_trees(table, part.subtables, reps, cfg.block_size, cfg.reorg(), seed, cfg.workers)
        timings["hbc"] = time.perf_counter() - t0
        cold = part.cold_tree if part.cold_tree.root is not None else None
    elif method == "key-order":
        cold, hot = baselines.key_order_blocks(table, cfg.block_size), []
    elif method == "kdtree":
        cold, hot = baselines.kdtree_blocks(table, cfg.block_size), []
    elif method == "curve":
        cold, hot = baselines.curve_blocks(table, cfg.block_size, cfg.hilbert_order), []
    else:
        cold, hot = baselines.tuple_baseline(table, cfg.tuple_max), []
    timings["build"] = time.perf_counter() - t_start
    forest = RoutingForest(table, cold, hot, cfg.leaf_scan_threshold)
    timings["total"] = time.perf_counter() - t_start
    return Layout(method, forest, timings, part)
