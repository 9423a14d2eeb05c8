"""Representative range queries, arrival-rate curves, and the perturbed
train/test workloads assembled from them.

Workload file grammar (one query per line, ``#`` lines are comments)::

    line   := interval "," qid "," rep ("," col "," lo "," hi)+
    interval, qid, rep, col := decimal integer
    lo, hi := Python float repr (round-trips exactly)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DOMAIN_HI, DOMAIN_LO, Query, Table

WORKLOAD_MAGIC = "# tierblocks-workload v1"
_EPS = 1e-9


class WorkloadFormatError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    min_predicates: int = 1
    max_predicates: int = 3
    width_range: tuple[float, float] = (0.05, 0.2)
    all_columns: bool = False


@dataclass
class TimedWorkload:
    intervals: list[list[Query]] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(b) for b in self.intervals)

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    def queries(self) -> list[Query]:
        return [q for batch in self.intervals for q in batch]

    def sizes(self) -> list[int]:
        return [len(b) for b in self.intervals]


def gen_representative(table: Table, count: int, cfg: GeneratorConfig | None = None, seed: int = 0) -> list[Query]:
    """Data-anchored range queries: a sampled tuple is the center of each box."""
    cfg = cfg or GeneratorConfig()
    if table.n == 0:
        raise ValueError("cannot anchor queries on an empty table")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    d = table.d
    out = []
    for qid in range(count):
        center = table.values[rng.integers(table.n)]
        if cfg.all_columns:
            cols = np.arange(d)
        else:
            k = int(rng.integers(cfg.min_predicates, cfg.max_predicates + 1))
            cols = np.sort(rng.choice(d, size=min(k, d), replace=False))
        bounds = []
        for c in cols:
            w = float(rng.uniform(*cfg.width_range))
            if w >= 1.0:
                lo, hi = DOMAIN_LO, DOMAIN_HI
            else:
                lo = max(DOMAIN_LO, center[c] - w / 2)
                hi = min(DOMAIN_HI, center[c] + w / 2)
            bounds.append((int(c), float(lo), float(hi)))
        out.append(Query(tuple(bounds), qid, qid))
    return out


def gen_arrival_curves(reps: Sequence[Query], intervals: int, burstiness: float = 0.5, seed: int = 0,
                       rate_scale: float = 1.0, correlation: float = 0.8) -> np.ndarray:
    """Integer frequency per (representative, interval).

    Each representative gets a heavy-tailed base rate, modulated over time by
    a log-normal AR(1) factor whose spread is ``burstiness``; zero burstiness
    gives flat curves.
    """
    if intervals < 1:
        raise ValueError("intervals must be >= 1")
    rng = np.random.default_rng(seed)
    r = len(reps)
    base = np.maximum(1.0, np.round(rng.lognormal(0.0, 1.0, r) * rate_scale))
    z = np.zeros((r, intervals))
    z[:, 0] = rng.standard_normal(r)
    for t in range(1, intervals):
        z[:, t] = correlation * z[:, t - 1] + np.sqrt(1 - correlation ** 2) * rng.standard_normal(r)
    rate = base[:, None] * np.exp(burstiness * z - burstiness ** 2 / 2)
    curves = np.floor(rate + 0.5).astype(np.int64)
    if curves.sum() == 0:
        curves[int(np.argmax(base)), 0] = 1
    return curves


def _perturb(q: Query, skew: float, rng: np.random.Generator) -> list[tuple[int, float, float]]:
    out = []
    for c, lo, hi in q.bounds:
        w = hi - lo
        nlo = float(np.clip(lo + rng.uniform(-skew * w, skew * w), DOMAIN_LO, DOMAIN_HI))
        nhi = float(np.clip(hi + rng.uniform(-skew * w, skew * w), DOMAIN_LO, DOMAIN_HI))
        if not nlo < nhi:
            mid = float(np.clip((nlo + nhi) / 2, DOMAIN_LO + _EPS, DOMAIN_HI - _EPS))
            nlo, nhi = mid - _EPS, mid + _EPS
        out.append((c, nlo, nhi))
    return out


def perturb_query(q: Query, skew: float, seed: int = 0) -> Query:
    """Shift every bound by uniform noise of at most ``skew`` times the range width."""
    if not 0.0 <= skew <= 1.0:
        raise ValueError("skew must lie in [0, 1]")
    if skew == 0:
        return q
    return Query(tuple(_perturb(q, skew, np.random.default_rng(seed))), q.qid, q.rep)


def assemble(reps: Sequence[Query], curves: np.ndarray, skew: float, seed: int = 0) -> tuple[TimedWorkload, TimedWorkload]:
    """Interval ``i`` holds ``curves[r][i]`` perturbed copies of representative ``r``.

    Train and test draw their noise from independent child seeds.
    """
    curves = np.asarray(curves)
    if curves.shape[0] != len(reps):
        raise ValueError("one curve per representative required")
    if not 0.0 <= skew <= 1.0:
        raise ValueError("skew must lie in [0, 1]")
    streams = np.random.SeedSequence(seed).spawn(2)
    out = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        qid = 0
        intervals = []
        for i in range(curves.shape[1]):
            batch = []
            for r, rep in enumerate(reps):
                for _ in range(int(curves[r, i])):
                    bounds = _perturb(rep, skew, rng) if skew > 0 else rep.bounds
                    batch.append(Query(tuple(bounds), qid, rep.rep if rep.rep >= 0 else r))
                    qid += 1
            intervals.append(batch)
        out.append(TimedWorkload(intervals))
    return out[0], out[1]


def write_workload(wl: TimedWorkload, path: str | Path, header: Sequence[str] = ()) -> None:
    lines = [WORKLOAD_MAGIC, f"# intervals={wl.n_intervals}"] + [f"# {h}" for h in header]
    for i, batch in enumerate(wl.intervals):
        for q in batch:
            fields = [str(i), str(q.qid), str(q.rep)]
            for c, lo, hi in q.bounds:
                fields += [str(c), repr(lo), repr(hi)]
            lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_workload(path: str | Path) -> TimedWorkload:
    n_intervals = 0
    rows: list[tuple[int, Query]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line.startswith("# intervals="):
            n_intervals = int(line.split("=", 1)[1])
            continue
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 6 or (len(parts) - 3) % 3:
            raise WorkloadFormatError(f"{path}:{lineno}: malformed workload line")
        try:
            interval, qid, rep = int(parts[0]), int(parts[1]), int(parts[2])
            if interval < 0:
                raise ValueError("negative interval index")
            bounds = tuple((int(parts[j]), float(parts[j + 1]), float(parts[j + 2]))
                           for j in range(3, len(parts), 3))
            rows.append((interval, Query(bounds, qid, rep)))
        except ValueError as exc:
            raise WorkloadFormatError(f"{path}:{lineno}: {exc}") from None
    n_intervals = max([n_intervals] + [i + 1 for i, _ in rows])
    wl = TimedWorkload([[] for _ in range(n_intervals)])
    for i, q in rows:
        wl.intervals[i].append(q)
    return wl


def write_queries(queries: Sequence[Query], path: str | Path, header: Sequence[str] = ()) -> None:
    write_workload(TimedWorkload([list(queries)]), path, header)
