from __future__ import annotations

import dataclasses
from typing import Any, Protocol, Sequence

import numpy as np

from .core import ContractError, InputError, SourceSentence, Vocab


@dataclasses.dataclass(frozen=True)
class SourceSummary:
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise ContractError("Source summary must be a finite 1-D vector")
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclasses.dataclass(frozen=True)
class ModelStepOutput:
    logprobs: np.ndarray  # log-softmax over the vocabulary
    next_state: Any


class SequenceModel(Protocol):
    """What every decoder needs from a scorer.

    State handles are immutable snapshots: `step` never mutates the handle it is
    given, so suspended hypotheses can keep theirs indefinitely.
    """

    vocab: Vocab

    @property
    def summary_dim(self) -> int: ...

    @property
    def embed_dim(self) -> int: ...

    def encode(self, source: SourceSentence) -> tuple[SourceSummary, Any]: ...

    def step(self, state: Any, last_token: int) -> ModelStepOutput: ...

    def embed(self, token: int) -> np.ndarray: ...


def check_source(vocab: Vocab, source: SourceSentence) -> None:
    for t in source.tokens:
        if not (0 <= t < vocab.size):
            raise InputError(f"Unknown token id in source: {t}")


def sequence_logprob(model: SequenceModel, source: SourceSentence, tokens: Sequence[int]) -> float:
    """Log-probability of `tokens` (EOS included if present) by chaining `step` from BOS."""
    _, state = model.encode(source)
    prev = model.vocab.bos_id
    total = 0.0
    for tok in tokens:
        out = model.step(state, prev)
        total += float(out.logprobs[model.vocab.check_id(tok)])
        state = out.next_state
        prev = tok
    return total
