from __future__ import annotations

import heapq
import logging
from typing import Iterable

from .core import ContractError, Hypothesis, hypothesis_sort_key

logger = logging.getLogger(__name__)

_Entry = tuple[tuple[float, int, tuple[int, ...]], Hypothesis]


class HypothesisQueue:
    """Single priority queue over hypotheses of any length.

    Finished and unfinished members live in separate heaps so "best B unfinished"
    never has to skip over finished entries. Keys are unique (seq_no), so heap
    entries never fall through to comparing hypotheses.
    """

    def __init__(self, capacity: int | None = None) -> None:
        if capacity is not None and capacity < 1:
            raise ContractError(f"Queue capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._unfinished: list[_Entry] = []
        self._finished: list[_Entry] = []
        self._seen: set[int] = set()
        self.evicted = 0

    def __len__(self) -> int:
        return len(self._unfinished) + len(self._finished)

    @property
    def n_finished(self) -> int:
        return len(self._finished)

    @property
    def n_unfinished(self) -> int:
        return len(self._unfinished)

    def push(self, h: Hypothesis) -> None:
        if h.seq_no in self._seen:
            raise ContractError(f"Hypothesis seq_no={h.seq_no} is already in the queue")
        entry = (hypothesis_sort_key(h), h)
        self._seen.add(h.seq_no)
        heapq.heappush(self._finished if h.finished else self._unfinished, entry)
        if self.capacity is not None and len(self) > self.capacity:
            self._evict_worst_unfinished()

    def extend(self, hyps: Iterable[Hypothesis]) -> None:
        for h in hyps:
            self.push(h)

    def _evict_worst_unfinished(self) -> None:
        # Finished hypotheses are never evicted.
        if not self._unfinished:
            return
        worst = max(range(len(self._unfinished)), key=lambda i: self._unfinished[i][0])
        _, h = self._unfinished[worst]
        self._unfinished[worst] = self._unfinished[-1]
        self._unfinished.pop()
        heapq.heapify(self._unfinished)
        self.evicted += 1
        logger.debug("queue at capacity %s: evicted seq_no=%d score=%.6f", self.capacity, h.seq_no, h.cached_score)

    def pop_best_unfinished(self, n: int) -> list[Hypothesis]:
        out = []
        while self._unfinished and len(out) < n:
            out.append(heapq.heappop(self._unfinished)[1])
        return out

    def best_finished(self) -> Hypothesis | None:
        return self._finished[0][1] if self._finished else None

    def best_unfinished(self) -> Hypothesis | None:
        return self._unfinished[0][1] if self._unfinished else None

    def finished(self) -> list[Hypothesis]:
        return [h for _, h in sorted(self._finished)]
