from __future__ import annotations

import dataclasses
import math
from typing import Any

SIGMA_FLOOR = 1e-4
LMS_MODES = ("expectation", "as_printed")


class InputError(ValueError):
    """Bad user input: malformed files, unknown tokens, impossible requests."""


class ContractError(RuntimeError):
    """A caller broke an API contract (shape mismatch, missing score, bad state handle)."""


@dataclasses.dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    eos_id: int
    bos_id: int
    _index: dict[str, int] = dataclasses.field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        toks = tuple(str(t) for t in self.tokens)
        object.__setattr__(self, "tokens", toks)
        index: dict[str, int] = {}
        for i, t in enumerate(toks):
            if t in index:
                raise InputError(f"Duplicate token in vocabulary: {t!r}")
            index[t] = i
        object.__setattr__(self, "_index", index)
        n = len(toks)
        for name, tid in (("eos_id", self.eos_id), ("bos_id", self.bos_id)):
            if not (0 <= int(tid) < n):
                raise InputError(f"{name}={tid} is outside the vocabulary (size {n})")
        if self.eos_id == self.bos_id:
            raise InputError("eos_id and bos_id must differ")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise InputError(f"Unknown token: {token!r}") from None

    def token(self, token_id: int) -> str:
        if not (0 <= token_id < self.size):
            raise InputError(f"Unknown token id: {token_id}")
        return self.tokens[token_id]

    def resolve(self, text: str) -> int:
        # Token strings win over numeric ids so digit-only vocabularies stay usable.
        if text in self._index:
            return self._index[text]
        try:
            tid = int(text)
        except ValueError:
            raise InputError(f"Unknown token: {text!r}") from None
        if 0 <= tid < self.size:
            return tid
        raise InputError(f"Unknown token: {text!r}")

    def check_id(self, token_id: int) -> int:
        if not (0 <= int(token_id) < self.size):
            raise InputError(f"Unknown token id: {token_id}")
        return int(token_id)

    def render(self, token_ids: tuple[int, ...] | list[int]) -> list[str]:
        return [self.tokens[t] for t in token_ids]


@dataclasses.dataclass(frozen=True)
class SourceSentence:
    tokens: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not self.tokens:
            raise InputError("Source sentence must contain at least one token")

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclasses.dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    cum_logprob: float
    finished: bool
    model_state: Any = dataclasses.field(default=None, repr=False, compare=False)
    pred_state: Any = dataclasses.field(default=None, repr=False, compare=False)
    cached_score: float | None = None
    seq_no: int = 0

    @classmethod
    def root(cls, model_state: Any, pred_state: Any = None) -> Hypothesis:
        return cls(tokens=(), cum_logprob=0.0, finished=False, model_state=model_state, pred_state=pred_state, cached_score=0.0, seq_no=0)

    @property
    def length(self) -> int:
        return len(self.tokens)

    def extend(
        self,
        token: int,
        logprob: float,
        *,
        eos_id: int,
        seq_no: int,
        model_state: Any,
        pred_state: Any = None,
    ) -> Hypothesis:
        if self.finished:
            raise ContractError("A finished hypothesis cannot be expanded")
        return Hypothesis(
            tokens=self.tokens + (int(token),),
            cum_logprob=self.cum_logprob + float(logprob),
            finished=int(token) == int(eos_id),
            model_state=model_state,
            pred_state=pred_state,
            cached_score=None,
            seq_no=int(seq_no),
        )

    def with_score(self, score: float) -> Hypothesis:
        return dataclasses.replace(self, cached_score=float(score))


@dataclasses.dataclass(frozen=True)
class ScoreConfig:
    lam: float = 1.0
    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 0.0  # negative values penalize
    tau: float = 0.0
    lmp_enabled: bool = False
    pg_enabled: bool = True
    lms_mode: str = "expectation"

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise InputError(f"lambda must be >= 0, got {self.lam}")
        if self.beta < 0:
            raise InputError(f"beta must be >= 0, got {self.beta}")
        if self.lms_mode not in LMS_MODES:
            raise InputError(f"lms_mode must be one of {LMS_MODES}, got {self.lms_mode!r}")


@dataclasses.dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma >= SIGMA_FLOOR):
            raise ContractError(f"sigma={self.sigma} is below the floor {SIGMA_FLOOR}")

    @classmethod
    def floored(cls, mu: float, sigma: float) -> GaussianParams:
        return cls(mu=float(mu), sigma=max(float(sigma), SIGMA_FLOOR))


@dataclasses.dataclass(frozen=True)
class SearchConfig:
    beam_size: int = 5
    max_steps: int = 150
    retain_size: int | None = None  # None -> 2 * beam_size
    queue_capacity: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise InputError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_steps < 1:
            raise InputError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.retain_size is None:
            object.__setattr__(self, "retain_size", 2 * self.beam_size)
        if int(self.retain_size) < self.beam_size:
            raise InputError(f"retain_size ({self.retain_size}) must be >= beam_size ({self.beam_size})")
        if self.queue_capacity is not None and self.queue_capacity < self.beam_size:
            raise InputError(f"queue_capacity ({self.queue_capacity}) must be >= beam_size ({self.beam_size})")

    def expansion_width(self) -> int:
        """Next tokens proposed per selected hypothesis.

        B whenever retain_size <= B*B; wider only when B alone could not fill the
        retained set (e.g. B=1, retain_size=2).
        """
        retain = int(self.retain_size or self.beam_size)
        return max(self.beam_size, math.ceil(retain / self.beam_size))


@dataclasses.dataclass(frozen=True)
class DecodeResult:
    best: Hypothesis
    all_finished: list[Hypothesis]
    steps_taken: int
    rank_score_trace: list[list[float]]
    fallback: bool = False
    queue_sizes: list[int] = dataclasses.field(default_factory=list)
    strategy: str = ""
    elapsed_ms: float = 0.0


def normalized_logprob(h: Hypothesis, lam: float) -> float:
    if h.length < 1:
        raise ContractError("normalized_logprob needs a hypothesis with at least one token")
    return h.cum_logprob / (float(h.length) ** lam)


def hypothesis_sort_key(h: Hypothesis) -> tuple[float, int, tuple[int, ...]]:
    if h.cached_score is None:
        raise ContractError(f"Hypothesis seq_no={h.seq_no} has no cached score")
    return (-h.cached_score, h.seq_no, h.tokens)


def compare_hypotheses(a: Hypothesis, b: Hypothesis) -> int:
    """-1 if `a` ranks before `b`, 1 if after, 0 only for identical keys."""
    ka = hypothesis_sort_key(a)
    kb = hypothesis_sort_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0
