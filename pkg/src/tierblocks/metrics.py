"""Tuple-level and block-level hit rates."""

from __future__ import annotations

from typing import Collection

import numpy as np

from .core import Query, satisfying_mask
from .router import Answer


def thr(ans: Answer, cached: np.ndarray) -> float | None:
    """Share of satisfying tuples that sit in cached blocks; None if there are none."""
    total = ans.matches.sum()
    if total == 0:
        return None
    return float(ans.matches[cached[ans.blocks]].sum() / total)


def bhr(ans: Answer, cached: np.ndarray) -> float | None:
    if ans.blocks.size == 0:
        return None
    return float(cached[ans.blocks].mean())


def thr_sets(q: Query, required: Collection[int], cached: Collection[int],
             block_rows: dict[int, np.ndarray], values: np.ndarray) -> float | None:
    """THR from explicit block-id sets, counting satisfying tuples by full scan."""
    def matches(b):
        return int(satisfying_mask(q, values[block_rows[b]]).sum())

    total = sum(matches(b) for b in required)
    if total == 0:
        return None
    return sum(matches(b) for b in set(required) & set(cached)) / total


def bhr_sets(required: Collection[int], cached: Collection[int]) -> float | None:
    if not required:
        return None
    return len(set(required) & set(cached)) / len(set(required))
