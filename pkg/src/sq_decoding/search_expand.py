from __future__ import annotations

import dataclasses
import itertools
import math
from typing import TYPE_CHECKING, Any, Iterator

import numpy as np

from .core import GaussianParams, Hypothesis, SourceSentence
from .model_base import SequenceModel, SourceSummary

if TYPE_CHECKING:
    from .lengthpred import LengthPredictor


@dataclasses.dataclass
class DecodeContext:

    model: SequenceModel
    source: SourceSentence
    summary: SourceSummary
    predictor: LengthPredictor | None = None
    encoder_gaussian: GaussianParams | None = None
    _counter: Iterator[int] = dataclasses.field(default_factory=lambda: itertools.count(1), repr=False)

    def next_seq_no(self) -> int:
        return next(self._counter)


def start(model: SequenceModel, source: SourceSentence, predictor: LengthPredictor | None = None) -> tuple[DecodeContext, Hypothesis]:
    summary, state = model.encode(source)
    ctx = DecodeContext(model=model, source=source, summary=summary, predictor=predictor)
    pred_state: Any = None
    if predictor is not None:
        ctx.encoder_gaussian, pred_state = predictor.start(summary)
    return ctx, Hypothesis.root(state, pred_state)


def top_tokens(logprobs: np.ndarray, k: int) -> list[int]:
    # stable: equal log-probs keep the lower id first
    order = np.argsort(-logprobs, kind="stable")
    out = []
    for tid in order[:k]:
        if not math.isfinite(float(logprobs[tid])):
            break
        out.append(int(tid))
    return out


def expand(ctx: DecodeContext, h: Hypothesis, width: int) -> list[Hypothesis]:
    vocab = ctx.model.vocab
    last = h.tokens[-1] if h.tokens else vocab.bos_id
    out = ctx.model.step(h.model_state, last)
    children = []
    for tok in top_tokens(out.logprobs, width):
        pred_state = None
        if ctx.predictor is not None and tok != vocab.eos_id:
            pred_state = ctx.predictor.advance(h.pred_state, ctx.model.embed(tok), ctx.summary)
        children.append(
            h.extend(
                tok,
                float(out.logprobs[tok]),
                eos_id=vocab.eos_id,
                seq_no=ctx.next_seq_no(),
                model_state=out.next_state,
                pred_state=pred_state,
            )
        )
    return children
