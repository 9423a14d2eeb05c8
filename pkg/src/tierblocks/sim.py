"""Cloud-edge migration and cloud-edge-device cache experiments, plus
construction-time benchmarking."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cache import CacheStats, make_cache
from .core import Query, Table
from .layout import Layout, LayoutConfig, build_layout
from .router import RoutingForest
from .scheduler import migrate_period, place, record_hits, update_heats
from .metrics import bhr, thr
from .workloadgen import TimedWorkload

METRIC_COLUMNS = ("method", "budget_or_capacity", "interval", "thr", "bhr", "moved_blocks", "moved_tuples")


@dataclass
class SimConfig:
    gamma: float = 0.6
    solver: str = "dp"
    policy: str = "lru"
    budgets: tuple[float, ...] = (0.04, 0.08, 0.16, 0.32)
    capacities: tuple[float, ...] = (0.01, 0.02, 0.04, 0.08)
    edge_budget: float = 0.08


@dataclass
class IntervalSample:
    method: str
    setting: float
    interval: int
    thr: float | None
    bhr: float | None
    thr_n: int
    bhr_n: int
    queries: int
    moved_blocks: int = 0
    moved_tuples: int = 0


@dataclass
class RunSummary:
    method: str
    task: str
    setting: float
    thr: float | None
    bhr: float | None
    queries: int
    empty_queries: int
    moved_blocks: int
    moved_tuples: int
    extra: dict = field(default_factory=dict)


class _Acc:
    def __init__(self):
        self.thr: list[float] = []
        self.bhr: list[float] = []
        self.empty = 0

    def add(self, forest: RoutingForest, q: Query, cached: np.ndarray) -> None:
        ans = forest.answer(q)
        t = thr(ans, cached)
        if t is None:
            self.empty += 1
        else:
            self.thr.append(t)
        b = bhr(ans, cached)
        if b is not None:
            self.bhr.append(b)


def _mean(xs: Sequence[float]) -> float | None:
    return float(np.mean(xs)) if len(xs) else None


def _summarize(method, task, setting, samples: Sequence[IntervalSample], empty: int) -> RunSummary:
    def weighted(attr, n_attr):
        num = sum(getattr(s, attr) * getattr(s, n_attr) for s in samples if getattr(s, attr) is not None)
        den = sum(getattr(s, n_attr) for s in samples)
        return num / den if den else None

    return RunSummary(method, task, setting, weighted("thr", "thr_n"), weighted("bhr", "bhr_n"),
                      sum(s.queries for s in samples), empty,
                      sum(s.moved_blocks for s in samples), sum(s.moved_tuples for s in samples))


def seed_placement(forest: RoutingForest, train: Iterable[Query], budget: int, solver: str) -> None:
    """Initial edge set: heat is the number of training queries touching each block."""
    forest.reset_state()
    record_hits(forest, train)
    forest.heat = forest.hits.astype(np.float64)
    forest.hits[:] = 0
    place(forest, budget, solver)


def run_cloud_edge(layout: Layout, train: TimedWorkload, test: TimedWorkload,
                   budgets: Sequence[float], cfg: SimConfig | None = None,
                   log: list | None = None) -> tuple[list[IntervalSample], list[RunSummary]]:
    """Per budget: seed placement from training, then measure-then-migrate per test interval.

    When ``log`` is given, ``(budget, MigrationStats)`` pairs are appended to it.
    """
    cfg = cfg or SimConfig()
    forest = layout.forest
    n = forest.values.shape[0]
    samples, summaries = [], []
    train_q = train.queries()
    for frac in budgets:
        budget = int(math.floor(frac * n))
        seed_placement(forest, train_q, budget, cfg.solver)
        run: list[IntervalSample] = []
        empty = 0
        for i, batch in enumerate(test.intervals):
            acc = _Acc()
            cached = forest.on_edge.copy()
            for q in batch:
                acc.add(forest, q, cached)
            _, stats = migrate_period(batch, forest, cfg.gamma, budget, cfg.solver, period=i)
            if log is not None:
                log.append((frac, stats))
            empty += acc.empty
            run.append(IntervalSample(layout.method, frac, i, _mean(acc.thr), _mean(acc.bhr), len(acc.thr),
                                      len(acc.bhr), len(batch), stats.blocks_moved, stats.tuples_moved))
        samples.extend(run)
        summaries.append(_summarize(layout.method, "cloud-edge", frac, run, empty))
    return samples, summaries


def run_three_tier(layout: Layout, train: TimedWorkload, test: TimedWorkload, capacities: Sequence[float],
                   cfg: SimConfig | None = None, log: list | None = None) -> tuple[list[IntervalSample], list[RunSummary]]:
    """End cache serves every query in arrival order while the edge migrates per interval.

    Hit rates are measured against end-cache residents before the query's
    blocks are admitted.
    """
    cfg = cfg or SimConfig()
    forest = layout.forest
    n = forest.values.shape[0]
    edge_budget = int(math.floor(cfg.edge_budget * n))
    sizes = forest.sizes
    train_q = train.queries()
    samples, summaries = [], []
    for frac in capacities:
        seed_placement(forest, train_q, edge_budget, cfg.solver)
        cache = make_cache(cfg.policy, int(math.floor(frac * n)))
        resident = np.zeros(forest.n_blocks, dtype=bool)
        stats = CacheStats()
        run: list[IntervalSample] = []
        empty = 0
        for i, batch in enumerate(test.intervals):
            acc = _Acc()
            for q in batch:
                acc.add(forest, q, resident)
                for b in forest.answer(q).blocks:
                    size = int(sizes[b])
                    hit, evicted = cache.access(int(b), size)
                    if hit:
                        stats.hits += 1
                        continue
                    stats.misses += 1
                    if forest.on_edge[b]:
                        stats.fetched_from_edge += 1
                    else:
                        stats.fetched_from_cloud += 1
                    if size > cache.capacity:
                        stats.uncacheable += 1
                    else:
                        resident[b] = True
                    stats.evictions += len(evicted)
                    resident[evicted] = False
            _, mstats = migrate_period(batch, forest, cfg.gamma, edge_budget, cfg.solver, period=i)
            if log is not None:
                log.append((frac, mstats))
            empty += acc.empty
            run.append(IntervalSample(layout.method, frac, i, _mean(acc.thr), _mean(acc.bhr), len(acc.thr),
                                      len(acc.bhr), len(batch), mstats.blocks_moved, mstats.tuples_moved))
        samples.extend(run)
        summary = _summarize(layout.method, "three-tier", frac, run, empty)
        summary.extra = asdict(stats)
        summaries.append(summary)
    return samples, summaries


@dataclass
class BenchRow:
    method: str
    seconds: float
    phases: dict[str, float]
    blocks: int


def bench_build(table: Table, methods: Sequence[str], reps: Sequence[Query], cfg: LayoutConfig | None = None,
                repeats: int = 3, seed: int = 0) -> list[BenchRow]:
    """Median wall-clock construction time per method over ``repeats`` runs."""
    out = []
    for method in methods:
        runs = [build_layout(table, method, reps, cfg, seed) for _ in range(repeats)]
        totals = [r.total_time for r in runs]
        mid = runs[int(np.argsort(totals)[len(totals) // 2])]
        phases = {k: v for k, v in mid.timings.items() if k not in ("total", "build")}
        out.append(BenchRow(method, float(np.median(totals)), phases, mid.forest.n_blocks))
    return out


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def metrics_csv(samples: Sequence[IntervalSample], header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for s in samples:
        w.writerow([s.method, f"{s.setting:g}", s.interval, _fmt(s.thr), _fmt(s.bhr), s.moved_blocks, s.moved_tuples])
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def summary_json(summaries: Sequence[RunSummary], provenance: dict | None = None) -> str:
    payload = {"provenance": provenance or {}, "runs": [asdict(s) for s in summaries]}
    return json.dumps(payload, indent=2, sort_keys=True)
