"""End-device block caches with variable-size entries.

Every policy evicts until the incoming block fits. With unit sizes each one
reduces to its textbook form; ARC's target ``p`` and list bounds are kept in
tuple units.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np


class BlockCache:
    policy = "base"

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = int(capacity)
        self.used = 0
        self.sizes: dict[int, int] = {}

    def __contains__(self, block_id: int) -> bool:
        return block_id in self.sizes

    def __len__(self) -> int:
        return len(self.sizes)

    @property
    def residents(self) -> set[int]:
        return set(self.sizes)

    def access(self, block_id: int, size: int = 1) -> tuple[bool, list[int]]:
        """Touch ``block_id``; returns ``(hit, evicted ids)``.

        Blocks larger than the whole cache bypass it and count as misses.
        """
        if block_id in self.sizes:
            self._on_hit(block_id)
            return True, []
        if size > self.capacity:
            self._on_bypass(block_id, size)
            return False, []
        evicted = []
        while self.used + size > self.capacity:
            victim = self._victim(block_id, size)
            self._remove(victim)
            evicted.append(victim)
        self.sizes[block_id] = size
        self.used += size
        self._on_admit(block_id, size)
        return False, evicted

    def _remove(self, block_id: int) -> None:
        self.used -= self.sizes.pop(block_id)
        self._on_evict(block_id)

    def _on_bypass(self, block_id: int, size: int) -> None:
        pass

    def _on_hit(self, block_id: int) -> None:
        raise NotImplementedError

    def _on_admit(self, block_id: int, size: int) -> None:
        raise NotImplementedError

    def _on_evict(self, block_id: int) -> None:
        raise NotImplementedError

    def _victim(self, incoming: int, size: int) -> int:
        raise NotImplementedError


class LRUCache(BlockCache):
    policy = "lru"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        self.order: OrderedDict[int, None] = OrderedDict()

    def _on_hit(self, block_id):
        self.order.move_to_end(block_id)

    def _on_admit(self, block_id, size):
        self.order[block_id] = None

    def _on_evict(self, block_id):
        del self.order[block_id]

    def _victim(self, incoming, size):
        return next(iter(self.order))


class LFUCache(BlockCache):
    """Least frequently used; ties go to the least recently used.

    Frequencies are forgotten on eviction.
    """

    policy = "lfu"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        self.freq: dict[int, int] = {}
        self.stamp: dict[int, int] = {}
        self.clock = 0

    def _touch(self, block_id):
        self.clock += 1
        self.stamp[block_id] = self.clock

    def _on_hit(self, block_id):
        self.freq[block_id] += 1
        self._touch(block_id)

    def _on_admit(self, block_id, size):
        self.freq[block_id] = 1
        self._touch(block_id)

    def _on_evict(self, block_id):
        del self.freq[block_id]
        del self.stamp[block_id]

    def _victim(self, incoming, size):
        return min(self.freq, key=lambda b: (self.freq[b], self.stamp[b]))


class ClockCache(BlockCache):
    """Second chance: one reference bit per block, hand sweeps the ring."""

    policy = "clock"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        self.ring: list[int] = []
        self.ref: dict[int, bool] = {}
        self.hand = 0

    def _on_hit(self, block_id):
        self.ref[block_id] = True

    def _on_admit(self, block_id, size):
        # insert just behind the hand so the new block is visited last
        self.ring.insert(self.hand, block_id)
        self.hand = (self.hand + 1) % len(self.ring)
        self.ref[block_id] = False

    def _on_evict(self, block_id):
        pos = self.ring.index(block_id)
        self.ring.pop(pos)
        del self.ref[block_id]
        if pos < self.hand:
            self.hand -= 1
        if self.ring:
            self.hand %= len(self.ring)
        else:
            self.hand = 0

    def _victim(self, incoming, size):
        while True:
            b = self.ring[self.hand]
            if self.ref[b]:
                self.ref[b] = False
                self.hand = (self.hand + 1) % len(self.ring)
            else:
                return b


class ARCCache(BlockCache):
    """Adaptive replacement cache (T1/T2 resident, B1/B2 ghosts).

    Sizes are tracked in tuples: ``p`` is the target tuple share of T1 and
    ghost lists are trimmed so each directory half stays within capacity.
    """

    policy = "arc"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        self.p = 0.0
        self.t1: OrderedDict[int, int] = OrderedDict()
        self.t2: OrderedDict[int, int] = OrderedDict()
        self.b1: OrderedDict[int, int] = OrderedDict()
        self.b2: OrderedDict[int, int] = OrderedDict()
        self._ghost_hit: str | None = None

    @staticmethod
    def _total(lst: OrderedDict) -> int:
        return sum(lst.values())

    def access(self, block_id: int, size: int = 1):
        self._ghost_hit = None
        if block_id not in self.sizes and size <= self.capacity:
            if block_id in self.b1:
                b1, b2 = self._total(self.b1), self._total(self.b2)
                delta = max(1.0, b2 / b1) * size if b1 else size
                self.p = min(self.p + delta, float(self.capacity))
                del self.b1[block_id]
                self._ghost_hit = "b1"
            elif block_id in self.b2:
                b1, b2 = self._total(self.b1), self._total(self.b2)
                delta = max(1.0, b1 / b2) * size if b2 else size
                self.p = max(self.p - delta, 0.0)
                del self.b2[block_id]
                self._ghost_hit = "b2"
        out = super().access(block_id, size)
        self._trim_ghosts()
        return out

    def _on_hit(self, block_id):
        if block_id in self.t1:
            self.t2[block_id] = self.t1.pop(block_id)
        else:
            self.t2.move_to_end(block_id)

    def _on_admit(self, block_id, size):
        if self._ghost_hit is not None:
            self.t2[block_id] = size
        else:
            self.t1[block_id] = size

    def _on_evict(self, block_id):
        if block_id in self.t1:
            self.b1[block_id] = self.t1.pop(block_id)
        else:
            self.b2[block_id] = self.t2.pop(block_id)

    def _trim_ghosts(self):
        c = self.capacity
        while self.b1 and self._total(self.t1) + self._total(self.b1) > c:
            self.b1.popitem(last=False)
        while self.b2 and self._total(self.t2) + self._total(self.b2) > c:
            self.b2.popitem(last=False)

    def _victim(self, incoming, size):
        t1 = self._total(self.t1)
        if self.t1 and (t1 > self.p or (self._ghost_hit == "b2" and t1 >= self.p) or not self.t2):
            return next(iter(self.t1))
        return next(iter(self.t2))

    def check(self) -> None:
        c = self.capacity
        t1, t2 = self._total(self.t1), self._total(self.t2)
        b1, b2 = self._total(self.b1), self._total(self.b2)
        assert t1 + t2 == self.used <= c
        assert set(self.t1) | set(self.t2) == set(self.sizes)
        assert not (set(self.t1) & set(self.t2))
        assert not ((set(self.b1) | set(self.b2)) & set(self.sizes))
        assert t1 + b1 <= c and t2 + b2 <= c
        assert t1 + t2 + b1 + b2 <= 2 * c
        assert 0 <= self.p <= c


POLICIES = {"lru": LRUCache, "lfu": LFUCache, "clock": ClockCache, "arc": ARCCache}


def make_cache(policy: str, capacity: int) -> BlockCache:
    try:
        return POLICIES[policy](capacity)
    except KeyError:
        raise ValueError(f"unknown cache policy {policy!r}; expected one of {sorted(POLICIES)}") from None


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    uncacheable: int = 0
    evictions: int = 0
    fetched_from_edge: int = 0
    fetched_from_cloud: int = 0
