from __future__ import annotations

import dataclasses
import math
from collections import defaultdict
from typing import Iterable, Sequence

from .core import DecodeResult, InputError, normalized_logprob


@dataclasses.dataclass(frozen=True)
class RankStat:
    step: int  # 1-based
    rank: int  # 0-based position in the selected set
    mean_score: float
    count: int


def rank_stats_from_traces(traces: Iterable[Sequence[Sequence[float]]], beam_size: int) -> list[RankStat]:
    sums: dict[tuple[int, int], float] = defaultdict(float)
    counts: dict[tuple[int, int], int] = defaultdict(int)
    n = 0
    for trace in traces:
        n += 1
        for step, row in enumerate(trace, start=1):
            for rank, value in enumerate(row[:beam_size]):
                sums[(step, rank)] += float(value)
                counts[(step, rank)] += 1
    if n == 0:
        raise InputError("No decode results to aggregate")
    return [RankStat(step=s, rank=r, mean_score=sums[(s, r)] / counts[(s, r)], count=counts[(s, r)]) for s, r in sorted(counts)]


def collect_rank_stats(results: Sequence[DecodeResult], beam_size: int) -> list[RankStat]:
    return rank_stats_from_traces((r.rank_score_trace for r in results), beam_size)


def output_score(result: DecodeResult, lam: float = 1.0) -> float:
    # -inf for an empty fallback
    if not result.best.tokens:
        return -math.inf
    return normalized_logprob(result.best, lam)


def mean_output_score(results: Sequence[DecodeResult], lam: float = 1.0) -> float:
    if not results:
        raise InputError("No decode results to aggregate")
    return sum(output_score(r, lam) for r in results) / len(results)


def exact_match_rate(results: Sequence[DecodeResult], references: Sequence[Sequence[int]], eos_id: int) -> float:
    if len(results) != len(references):
        raise InputError(f"{len(results)} results but {len(references)} references")
    if not results:
        raise InputError("No decode results to aggregate")
    hits = sum(1 for r, ref in zip(results, references) if r.best.tokens == tuple(ref) + (eos_id,))
    return hits / len(results)
