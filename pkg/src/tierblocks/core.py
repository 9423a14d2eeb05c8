"""Domain types and the geometric predicates every other module relies on.

Tables are held column-normalized in a dense ``(n, d)`` float array; row ids
are positions in that array. Queries are conjunctions of strict open ranges
``lo < t[col] < hi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

# Generated bounds are clipped to this padded domain so the strict predicate can
# still reach tuples sitting exactly on 0.0 or 1.0 after normalization.
DOMAIN_PAD = 1e-6
DOMAIN_LO = -DOMAIN_PAD
DOMAIN_HI = 1.0 + DOMAIN_PAD


class DegenerateBlockError(ValueError):
    """Raised when an MBR is requested for an empty tuple set."""


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class Tier(str, Enum):
    CLOUD = "cloud"
    EDGE = "edge"
    END = "end"


@dataclass(frozen=True)
class Schema:
    names: tuple[str, ...]
    kinds: tuple[ColumnKind, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise ValueError("schema needs at least one column")
        if len(self.names) != len(self.kinds):
            raise ValueError("names and kinds differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")

    @property
    def d(self) -> int:
        return len(self.names)

    @classmethod
    def numeric(cls, d: int, prefix: str = "c") -> "Schema":
        return cls(tuple(f"{prefix}{i}" for i in range(d)), (ColumnKind.NUMERIC,) * d)


@dataclass
class Table:
    """Normalized table. ``values[i]`` is the tuple with row id ``i``."""

    schema: Schema
    values: np.ndarray
    # query -> sorted satisfying row ids, shared by every layout over this table
    match_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.schema.d:
            raise ValueError(f"values shape {self.values.shape} does not match d={self.schema.d}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("table contains non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.schema.d

    def __len__(self) -> int:
        return self.n

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "Table":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        schema = Schema.numeric(arr.shape[1]) if names is None else Schema(
            tuple(names), (ColumnKind.NUMERIC,) * len(names))
        return cls(schema, arr)


@dataclass(frozen=True)
class Query:
    """Conjunctive range query; ``bounds`` holds ``(col, lo, hi)`` sorted by column."""

    bounds: tuple[tuple[int, float, float], ...]
    qid: int = 0
    rep: int = -1

    def __post_init__(self):
        if not self.bounds:
            raise ValueError("query must bound at least one column")
        cols = [b[0] for b in self.bounds]
        if len(set(cols)) != len(cols):
            raise ValueError("duplicate column in query bounds")
        for col, lo, hi in self.bounds:
            if col < 0:
                raise ValueError(f"negative column index {col}")
            if not lo < hi:
                raise ValueError(f"empty range on column {col}: ({lo}, {hi})")
        object.__setattr__(self, "bounds", tuple(sorted((int(c), float(l), float(h)) for c, l, h in self.bounds)))

    @classmethod
    def from_mapping(cls, bounds: Mapping[int, tuple[float, float]], qid: int = 0, rep: int = -1) -> "Query":
        return cls(tuple((c, lo, hi) for c, (lo, hi) in bounds.items()), qid, rep)

    @classmethod
    def full(cls, d: int, qid: int = 0) -> "Query":
        return cls(tuple((c, DOMAIN_LO, DOMAIN_HI) for c in range(d)), qid)

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(b[0] for b in self.bounds)

    def box(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(lo, hi)`` arrays of length d; unbounded columns are infinite."""
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
        for c, l, h in self.bounds:
            if c >= d:
                raise ValueError(f"query bounds column {c} but table has d={d}")
            lo[c] = l
            hi[c] = h
        return lo, hi

    def with_ids(self, qid: int, rep: int | None = None) -> "Query":
        return Query(self.bounds, qid, self.rep if rep is None else rep)


@dataclass(frozen=True)
class MBR:
    """Per-dimension closed ``[min, max]`` box (the Max-Min index)."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins/maxs must be 1-d arrays of equal length")
        if np.any(mins > maxs):
            raise ValueError("MBR min exceeds max")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def d(self) -> int:
        return self.mins.shape[0]

    def as_pairs(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.mins, self.maxs)]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "MBR":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(self.mins <= p) and np.all(p <= self.maxs))

    def union(self, other: "MBR") -> "MBR":
        return MBR(np.minimum(self.mins, other.mins), np.maximum(self.maxs, other.maxs))

    def center(self) -> np.ndarray:
        return (self.mins + self.maxs) / 2.0

    def __eq__(self, other):
        if not isinstance(other, MBR):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.maxs, other.maxs)

    def __hash__(self):
        return hash((self.mins.tobytes(), self.maxs.tobytes()))


@dataclass
class Block:
    block_id: int
    rows: np.ndarray
    mbr: MBR
    heat: float = 0.0
    hits: int = 0
    placement: Tier = Tier.CLOUD

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])


def tuple_satisfies(q: Query, t) -> bool:
    for c, lo, hi in q.bounds:
        v = t[c]
        if not (lo < v < hi):
            return False
    return True


def satisfying_mask(q: Query, values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`tuple_satisfies` over the rows of ``values``."""
    mask = np.ones(values.shape[0], dtype=bool)
    for c, lo, hi in q.bounds:
        col = values[:, c]
        mask &= (col > lo) & (col < hi)
    return mask


def query_intersects(q: Query, m: MBR) -> bool:
    # Open (lo, hi) meets closed [min, max] iff min < hi and max > lo.
    for c, lo, hi in q.bounds:
        if not (m.mins[c] < hi and m.maxs[c] > lo):
            return False
    return True


def intersects_many(q: Query, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """Boolean mask over stacked MBRs ``mins``/``maxs`` of shape ``(m, d)``."""
    mask = np.ones(mins.shape[0], dtype=bool)
    for c, lo, hi in q.bounds:
        mask &= (mins[:, c] < hi) & (maxs[:, c] > lo)
    return mask


def mbr_of(tuples) -> MBR:
    arr = np.asarray(tuples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :] if arr.size else arr.reshape(0, 0)
    if arr.shape[0] == 0:
        raise DegenerateBlockError("cannot bound an empty tuple set")
    return MBR(arr.min(axis=0), arr.max(axis=0))


def matching_rows(table: Table, q: Query) -> np.ndarray:
    """Row ids satisfying ``q``, memoized on the table."""
    rows = table.match_cache.get(q)
    if rows is None:
        rows = np.flatnonzero(satisfying_mask(q, table.values))
        table.match_cache[q] = rows
    return rows
