from __future__ import annotations

import logging
import time

from .core import ContractError, DecodeResult, Hypothesis, SearchConfig, SourceSentence, hypothesis_sort_key, normalized_logprob
from .model_base import SequenceModel
from .search_expand import expand, start

logger = logging.getLogger(__name__)

BEAM_MODES = ("vanilla", "length_norm")


def trace_row(selected: list[Hypothesis], lam: float) -> list[float]:
    return sorted((normalized_logprob(h, lam) for h in selected if h.tokens), reverse=True)


def beam_search(
    model: SequenceModel,
    source: SourceSentence,
    cfg: SearchConfig,
    mode: str = "vanilla",
    lam: float = 1.0,
) -> DecodeResult:
    """Fixed-width search: every step keeps the global top-B candidates.

    Finished candidates move to the completed set and the live beam shrinks
    accordingly; the search stops once B hypotheses are completed, the beam is
    empty, or max_steps is reached.
    """
    if mode not in BEAM_MODES:
        raise ContractError(f"Unknown beam mode: {mode!r}")
    started = time.perf_counter()
    B = cfg.beam_size
    ctx, root = start(model, source)

    def rank(h: Hypothesis) -> Hypothesis:
        return h.with_score(h.cum_logprob if mode == "vanilla" else normalized_logprob(h, lam))

    live: list[Hypothesis] = [root]
    completed: list[Hypothesis] = []
    trace: list[list[float]] = []
    queue_sizes: list[int] = []
    steps = 0
    for step in range(1, cfg.max_steps + 1):
        steps = step
        trace.append(trace_row(live, lam))
        candidates = [rank(c) for h in live for c in expand(ctx, h, B)]
        candidates.sort(key=hypothesis_sort_key)
        kept = candidates[:B]
        completed.extend(h for h in kept if h.finished)
        previous = live
        live = [h for h in kept if not h.finished]
        queue_sizes.append(len(live) + len(completed))
        logger.debug("beam step %d: live=%d completed=%d", step, len(live), len(completed))
        if len(completed) >= B or not live:
            break

    fallback = not completed
    if completed:
        best = min(completed, key=hypothesis_sort_key)
    else:
        pool = live or previous
        best = min(pool, key=hypothesis_sort_key)
        logger.debug("beam search found no finished hypothesis in %d steps; falling back", steps)
    return DecodeResult(
        best=best,
        all_finished=sorted(completed, key=hypothesis_sort_key),
        steps_taken=steps,
        rank_score_trace=trace,
        fallback=fallback,
        queue_sizes=queue_sizes,
        strategy="beam" if mode == "vanilla" else "beam-lnorm",
        elapsed_ms=(time.perf_counter() - started) * 1000.0,
    )


def greedy_decode(model: SequenceModel, source: SourceSentence, *, max_steps: int = 150) -> DecodeResult:
    return beam_search(model, source, SearchConfig(beam_size=1, max_steps=max_steps), mode="vanilla")
