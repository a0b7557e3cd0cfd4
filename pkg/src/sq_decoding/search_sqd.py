from __future__ import annotations

import logging
import time

from .core import (
    DecodeResult,
    GaussianParams,
    Hypothesis,
    InputError,
    ScoreConfig,
    SearchConfig,
    SourceSentence,
    hypothesis_sort_key,
    normalized_logprob,
)
from .lengthpred import LengthPredictor, PredictorState, lmp
from .model_base import SequenceModel
from .search_beam import beam_search, trace_row
from .search_expand import DecodeContext, expand, start
from .search_queue import HypothesisQueue

logger = logging.getLogger(__name__)

STRATEGIES = ("beam", "beam-lnorm", "sqd")


def progress_penalty(h: Hypothesis, source: SourceSentence, cfg: ScoreConfig) -> float:
    if h.finished or not cfg.pg_enabled:
        return 0.0
    return cfg.alpha * (h.length**cfg.beta) / (source.length**cfg.beta)


def score(
    h: Hypothesis,
    source: SourceSentence,
    cfg: ScoreConfig,
    pred_state: PredictorState | None = None,
    encoder_gaussian: GaussianParams | None = None,
) -> float:
    """normalized log-probability + progress penalty + length-matching penalty.

    Both penalties are 0 for finished hypotheses.
    """
    total = normalized_logprob(h, cfg.lam) + progress_penalty(h, source, cfg)
    if cfg.lmp_enabled and not h.finished:
        if pred_state is None or encoder_gaussian is None:
            raise InputError("The length-matching penalty needs a length predictor")
        total += lmp(h, pred_state, encoder_gaussian, cfg)
    return total


def _scored(ctx: DecodeContext, h: Hypothesis, cfg: ScoreConfig) -> Hypothesis:
    return h.with_score(score(h, ctx.source, cfg, h.pred_state, ctx.encoder_gaussian))


def single_queue_decode(
    model: SequenceModel,
    source: SourceSentence,
    cfg: SearchConfig,
    score_cfg: ScoreConfig,
    predictor: LengthPredictor | None = None,
) -> DecodeResult:
    """Best-first decoding over one queue holding hypotheses of every length.

    Each step takes the best B unfinished hypotheses out of the queue, expands
    each one, scores all candidates and merges the best `retain_size` back. Stops
    once the queue holds B finished hypotheses or after max_steps steps.
    """
    if score_cfg.lmp_enabled and predictor is None:
        raise InputError("lmp_enabled requires a length predictor (train one with train-lmp)")
    started = time.perf_counter()
    B = cfg.beam_size
    retain = int(cfg.retain_size or B)
    width = cfg.expansion_width()
    ctx, root = start(model, source, predictor if score_cfg.lmp_enabled else None)

    queue = HypothesisQueue(cfg.queue_capacity)
    queue.push(root)
    trace: list[list[float]] = []
    queue_sizes: list[int] = []
    selected: list[Hypothesis] = [root]
    steps = 0
    for step in range(1, cfg.max_steps + 1):
        batch = queue.pop_best_unfinished(B)
        if not batch:
            break
        selected = batch
        steps = step
        trace.append(trace_row(selected, score_cfg.lam))
        candidates = [_scored(ctx, c, score_cfg) for h in selected for c in expand(ctx, h, width)]
        candidates.sort(key=hypothesis_sort_key)
        queue.extend(candidates[:retain])
        queue_sizes.append(len(queue))
        logger.debug(
            "sqd step %d: selected=%d candidates=%d queue=%d finished=%d",
            step,
            len(selected),
            len(candidates),
            len(queue),
            queue.n_finished,
        )
        if queue.n_finished >= B:
            break

    best = queue.best_finished()
    fallback = best is None
    if best is None:
        best = queue.best_unfinished() or min(selected, key=hypothesis_sort_key)
        logger.debug("sqd found no finished hypothesis in %d steps; falling back", steps)
    return DecodeResult(
        best=best,
        all_finished=queue.finished(),
        steps_taken=steps,
        rank_score_trace=trace,
        fallback=fallback,
        queue_sizes=queue_sizes,
        strategy="sqd",
        elapsed_ms=(time.perf_counter() - started) * 1000.0,
    )


def decode(
    model: SequenceModel,
    source: SourceSentence,
    strategy: str,
    search_cfg: SearchConfig,
    score_cfg: ScoreConfig,
    predictor: LengthPredictor | None = None,
) -> DecodeResult:
    if strategy == "beam":
        return beam_search(model, source, search_cfg, mode="vanilla", lam=score_cfg.lam)
    if strategy == "beam-lnorm":
        return beam_search(model, source, search_cfg, mode="length_norm", lam=score_cfg.lam)
    if strategy == "sqd":
        return single_queue_decode(model, source, search_cfg, score_cfg, predictor)
    raise InputError(f"Unknown strategy: {strategy!r} (expected one of {', '.join(STRATEGIES)})")

