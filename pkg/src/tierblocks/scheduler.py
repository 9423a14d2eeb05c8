"""Block temperature, knapsack placement between cloud and edge, and the
periodic migration loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .core import Query
from .router import RoutingForest, apply_placement

VALUE_SCALE = 1000
DP_CELL_LIMIT = 400_000_000


@dataclass(frozen=True)
class HeatState:
    heat: float = 0.0
    hits: int = 0


def update_heat(state: HeatState, gamma: float) -> HeatState:
    """Exponential smoothing: ``gamma * H + (1 - gamma) * hits``; hits reset."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return HeatState(gamma * state.heat + (1.0 - gamma) * state.hits, 0)


def update_heats(heat: np.ndarray, hits: np.ndarray, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return gamma * heat + (1.0 - gamma) * hits


@dataclass
class KnapsackInstance:
    budget: int
    sizes: Sequence[int]
    values: Sequence[float]
    ids: Sequence[int] | None = None

    def __post_init__(self):
        if len(self.sizes) != len(self.values):
            raise ValueError("sizes and values differ in length")
        if self.ids is None:
            self.ids = list(range(len(self.sizes)))
        if any(s < 1 for s in self.sizes):
            raise ValueError("item sizes must be >= 1")
        if any(v < 0 for v in self.values):
            raise ValueError("item values must be >= 0")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass
class PlacementPlan:
    selected: frozenset[int]
    value: float
    used: int

    def __contains__(self, block_id: int) -> bool:
        return block_id in self.selected


def _plan(inst: KnapsackInstance, picked: Sequence[int]) -> PlacementPlan:
    return PlacementPlan(frozenset(inst.ids[i] for i in picked),
                         float(sum(inst.values[i] for i in picked)),
                         int(sum(inst.sizes[i] for i in picked)))


def _trivial(inst: KnapsackInstance) -> PlacementPlan | None:
    n = len(inst.sizes)
    if inst.budget == 0 or n == 0:
        return PlacementPlan(frozenset(), 0.0, 0)
    if sum(inst.sizes) <= inst.budget:
        return _plan(inst, range(n))
    return None


def solve_knapsack_dp(inst: KnapsackInstance) -> PlacementPlan:
    """Exact 0-1 knapsack by capacity-indexed dynamic programming.

    Values are quantized to integers (x1000) so ties compare exactly; on ties
    the lower-id item wins. Capacities are divided by the gcd of item sizes.
    """
    trivial = _trivial(inst)
    if trivial is not None:
        return trivial
    order = sorted(range(len(inst.sizes)), key=lambda i: inst.ids[i])
    items = [i for i in order if inst.values[i] > 0 and inst.sizes[i] <= inst.budget]
    if not items:
        return PlacementPlan(frozenset(), 0.0, 0)
    sizes = [int(inst.sizes[i]) for i in items]
    g = reduce(math.gcd, sizes)
    cap = inst.budget // g
    w = [s // g for s in sizes]
    v = [int(round(inst.values[i] * VALUE_SCALE)) for i in items]

    if len(set(w)) == 1:
        # equal sizes: the optimum is simply the most valuable items
        take = cap // w[0]
        ranked = sorted(range(len(items)), key=lambda j: (-v[j], j))[:take]
        return _plan(inst, [items[j] for j in sorted(ranked)])

    if len(items) * (cap + 1) > DP_CELL_LIMIT:
        raise MemoryError(f"DP table of {len(items)}x{cap + 1} cells is too large; use the greedy solver")
    best = np.zeros(cap + 1, dtype=np.int64)
    keep = np.zeros((len(items), cap + 1), dtype=bool)
    for j, (wj, vj) in enumerate(zip(w, v)):
        cand = best[:-wj] + vj if wj <= cap else None
        if cand is None:
            continue
        take = cand > best[wj:]
        keep[j, wj:] = take
        best[wj:] = np.where(take, cand, best[wj:])
    c = cap
    picked = []
    for j in range(len(items) - 1, -1, -1):
        if keep[j, c]:
            picked.append(items[j])
            c -= w[j]
    return _plan(inst, sorted(picked))


def solve_knapsack_greedy(inst: KnapsackInstance) -> PlacementPlan:
    """Density-ordered fill, or the single best fitting item if that is worth more."""
    trivial = _trivial(inst)
    if trivial is not None:
        return trivial
    fits = [i for i in range(len(inst.sizes)) if inst.sizes[i] <= inst.budget and inst.values[i] > 0]
    if not fits:
        return PlacementPlan(frozenset(), 0.0, 0)
    fits.sort(key=lambda i: (-inst.values[i] / inst.sizes[i], inst.ids[i]))
    room = inst.budget
    picked = []
    for i in fits:
        if inst.sizes[i] <= room:
            picked.append(i)
            room -= inst.sizes[i]
    single = max(fits, key=lambda i: (inst.values[i], -inst.ids[i]))
    fill = _plan(inst, picked)
    if inst.values[single] > fill.value:
        return _plan(inst, [single])
    return fill


SOLVERS: dict[str, Callable[[KnapsackInstance], PlacementPlan]] = {
    "dp": solve_knapsack_dp,
    "greedy": solve_knapsack_greedy,
}


def solve_knapsack(inst: KnapsackInstance, solver: str = "dp") -> PlacementPlan:
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; expected one of {sorted(SOLVERS)}") from None
    return fn(inst)


@dataclass
class MigrationStats:
    period: int
    blocks_to_edge: int
    blocks_to_cloud: int
    tuples_moved: int
    plan_value: float
    solve_time: float

    @property
    def blocks_moved(self) -> int:
        return self.blocks_to_edge + self.blocks_to_cloud


MIGRATION_COLUMNS = ("period", "blocks_to_edge", "blocks_to_cloud", "tuples_moved", "plan_value", "solve_time")


def migration_rows(stats: Sequence[MigrationStats]) -> list[list]:
    return [[s.period, s.blocks_to_edge, s.blocks_to_cloud, s.tuples_moved, f"{s.plan_value:.6f}",
             f"{s.solve_time:.6f}"] for s in stats]


def place(forest: RoutingForest, budget: int, solver: str = "dp", period: int = 0) -> tuple[PlacementPlan, MigrationStats]:
    """Solve the knapsack over every block's current heat and apply the result."""
    inst = KnapsackInstance(int(budget), forest.sizes.tolist(), forest.heat.tolist())
    t0 = time.perf_counter()
    plan = solve_knapsack(inst, solver)
    elapsed = time.perf_counter() - t0
    before = forest.on_edge.copy()
    apply_placement(forest, plan.selected)
    to_edge = forest.on_edge & ~before
    to_cloud = before & ~forest.on_edge
    moved = int(forest.sizes[to_edge].sum() + forest.sizes[to_cloud].sum())
    forest.sync_blocks()
    stats = MigrationStats(period, int(to_edge.sum()), int(to_cloud.sum()), moved, plan.value, elapsed)
    return plan, stats


def record_hits(forest: RoutingForest, batch: Sequence[Query]) -> None:
    for q in batch:
        forest.hits[forest.answer(q).blocks] += 1


def migrate_period(batch: Sequence[Query], forest: RoutingForest, gamma: float, budget: int,
                   solver: str = "dp", period: int = 0) -> tuple[PlacementPlan, MigrationStats]:
    """One migration cycle: count hits, update heat, re-solve placement."""
    record_hits(forest, batch)
    forest.heat = update_heats(forest.heat, forest.hits, gamma)
    forest.hits[:] = 0
    return place(forest, budget, solver, period)


@dataclass
class PeriodMetrics:
    interval: int
    thr: float | None
    bhr: float | None
    queries: int
    empty_queries: int
    moved_blocks: int = 0
    moved_tuples: int = 0


def evaluate_batch(forest: RoutingForest, batch: Sequence[Query], cached: np.ndarray) -> tuple[float | None, float | None, int]:
    """Mean THR/BHR of ``batch`` against the boolean residency mask ``cached``."""
    from .metrics import bhr, thr

    thrs, bhrs = [], []
    empty = 0
    for q in batch:
        ans = forest.answer(q)
        t = thr(ans, cached)
        if t is None:
            empty += 1
        else:
            thrs.append(t)
        b = bhr(ans, cached)
        if b is not None:
            bhrs.append(b)
    mean = lambda xs: float(np.mean(xs)) if xs else None
    return mean(thrs), mean(bhrs), empty


@dataclass
class DriverResult:
    metrics: list[PeriodMetrics] = field(default_factory=list)
    migrations: list[MigrationStats] = field(default_factory=list)
    plans: list[PlacementPlan] = field(default_factory=list)


def period_driver(intervals: Sequence[Sequence[Query]], forest: RoutingForest, gamma: float,
                  budget: int, solver: str = "dp") -> DriverResult:
    """Measure each interval against the current edge set, then migrate on it."""
    out = DriverResult()
    for i, batch in enumerate(intervals):
        t, b, empty = evaluate_batch(forest, batch, forest.on_edge)
        plan, stats = migrate_period(batch, forest, gamma, budget, solver, period=i)
        out.metrics.append(PeriodMetrics(i, t, b, len(batch), empty, stats.blocks_moved, stats.tuples_moved))
        out.migrations.append(stats)
        out.plans.append(plan)
    return out
