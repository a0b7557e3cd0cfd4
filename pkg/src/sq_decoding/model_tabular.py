from __future__ import annotations

import dataclasses
import math
from typing import Any

import numpy as np

from .core import ContractError, InputError, SourceSentence, Vocab
from .model_base import ModelStepOutput, SourceSummary, check_source

PROB_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class TabularHandle:
    state: str
    started: bool  # False until BOS has been consumed


@dataclasses.dataclass(frozen=True)
class TabularRow:
    probs: np.ndarray  # (V,)
    logprobs: np.ndarray  # (V,), -inf where prob == 0
    next: dict[int, str]


@dataclasses.dataclass(frozen=True)
class TabularModel:
    """Exact finite-state scorer: every state carries a declared next-token distribution."""

    vocab: Vocab
    rows: dict[str, TabularRow]
    start: str
    start_states: dict[str, str] = dataclasses.field(default_factory=dict)  # source text -> state
    summaries: dict[str, np.ndarray] = dataclasses.field(default_factory=dict)  # source text -> vector
    default_summary: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.start not in self.rows:
            raise InputError(f"Start state {self.start!r} is not declared")
        for key, st in self.start_states.items():
            if st not in self.rows:
                raise InputError(f"Start state {st!r} for source {key!r} is not declared")
        dims = {int(np.asarray(v).shape[0]) for v in self.summaries.values()}
        if self.default_summary is not None:
            dims.add(int(np.asarray(self.default_summary).shape[0]))
        if len(dims) > 1:
            raise InputError(f"Source summaries have inconsistent dimensions: {sorted(dims)}")

    @property
    def summary_dim(self) -> int:
        if self.default_summary is not None:
            return int(np.asarray(self.default_summary).shape[0])
        for v in self.summaries.values():
            return int(np.asarray(v).shape[0])
        return self.vocab.size

    @property
    def embed_dim(self) -> int:
        return self.vocab.size

    def source_key(self, source: SourceSentence) -> str:
        return " ".join(self.vocab.render(source.tokens))

    def start_state_for(self, source: SourceSentence) -> str:
        return self.start_states.get(self.source_key(source), self.start)

    def encode(self, source: SourceSentence) -> tuple[SourceSummary, TabularHandle]:
        check_source(self.vocab, source)
        key = self.source_key(source)
        if key in self.summaries:
            vec = np.asarray(self.summaries[key], dtype=np.float64)
        elif self.default_summary is not None:
            vec = np.asarray(self.default_summary, dtype=np.float64)
        else:
            vec = np.zeros(self.summary_dim, dtype=np.float64)
        return SourceSummary(vec.copy()), TabularHandle(state=self.start_states.get(key, self.start), started=False)

    def step(self, state: Any, last_token: int) -> ModelStepOutput:
        if not isinstance(state, TabularHandle) or state.state not in self.rows:
            raise ContractError(f"Invalid tabular state handle: {state!r}")
        if not state.started:
            if last_token != self.vocab.bos_id:
                raise ContractError("The first step of a tabular model must consume BOS")
            nxt = state.state
        else:
            nxt_opt = self.rows[state.state].next.get(int(last_token))
            if nxt_opt is None:
                raise ContractError(f"State {state.state!r} has no transition on token {last_token}")
            nxt = nxt_opt
        return ModelStepOutput(logprobs=self.rows[nxt].logprobs, next_state=TabularHandle(state=nxt, started=True))

    def embed(self, token: int) -> np.ndarray:
        vec = np.zeros(self.vocab.size, dtype=np.float64)
        vec[self.vocab.check_id(token)] = 1.0
        return vec

    def path_logprob(self, source: SourceSentence, tokens: list[int] | tuple[int, ...]) -> float:
        """Log of the product of table probabilities along `tokens`."""
        state = self.start_state_for(source)
        prob = 1.0
        for tok in tokens:
            row = self.rows[state]
            prob *= float(row.probs[tok])
            if tok == self.vocab.eos_id:
                break
            state = row.next.get(int(tok), state)
        return math.log(prob) if prob > 0 else -math.inf

    @classmethod
    def from_description(cls, desc: dict) -> TabularModel:
        try:
            tokens = [str(t) for t in desc["tokens"]]
            vocab = Vocab(tuple(tokens), eos_id=tokens.index(str(desc["eos"])), bos_id=tokens.index(str(desc["bos"])))
            states_desc = dict(desc["states"])
            start = str(desc["start"])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InputError):
                raise
            raise InputError(f"Invalid tabular model description: {e}") from e

        rows: dict[str, TabularRow] = {}
        for name, spec in states_desc.items():
            if not isinstance(spec, dict):
                raise InputError(f"State {name!r} must be an object with probs and next, got {type(spec).__name__}")
            try:
                prob_items = [(str(tok), float(p)) for tok, p in dict(spec.get("probs", {})).items()]
                next_items = [(str(tok), str(st)) for tok, st in dict(spec.get("next", {})).items()]
            except (TypeError, ValueError) as e:
                raise InputError(f"State {name!r}: invalid probs or next: {e}") from e
            probs = np.zeros(vocab.size, dtype=np.float64)
            for tok, p in prob_items:
                if p < 0:
                    raise InputError(f"State {name!r}: negative probability for {tok!r}")
                probs[vocab.index(tok)] = p
            total = float(np.sum(probs))
            if abs(total - 1.0) > PROB_TOLERANCE:
                raise InputError(f"State {name!r}: probabilities sum to {total!r}, expected 1")
            nxt = {vocab.index(tok): st for tok, st in next_items}
            with np.errstate(divide="ignore"):
                logprobs = np.log(probs)
            rows[str(name)] = TabularRow(probs=probs, logprobs=logprobs, next=nxt)

        for name, row in rows.items():
            for tid in np.nonzero(row.probs)[0]:
                tid = int(tid)
                if tid == vocab.eos_id:
                    continue
                target = row.next.get(tid)
                if target is None:
                    raise InputError(f"State {name!r}: token {vocab.tokens[tid]!r} has probability > 0 but no transition")
                if target not in rows:
                    raise InputError(f"State {name!r}: transition on {vocab.tokens[tid]!r} targets unknown state {target!r}")

        try:
            summaries = {str(k): np.asarray(v, dtype=np.float64) for k, v in dict(desc.get("summaries", {}) or {}).items()}
            default_summary = desc.get("default_summary")
            if default_summary is not None:
                default_summary = np.asarray(default_summary, dtype=np.float64)
            start_states = {str(k): str(v) for k, v in dict(desc.get("start_states", {}) or {}).items()}
        except (TypeError, ValueError) as e:
            raise InputError(f"Invalid summaries or start_states: {e}") from e
        for key, vec in [*summaries.items(), ("default_summary", default_summary)]:
            if vec is not None and vec.ndim != 1:
                raise InputError(f"Summary {key!r} must be a flat list of numbers")
        return cls(
            vocab=vocab,
            rows=rows,
            start=start,
            start_states=start_states,
            summaries=summaries,
            default_summary=default_summary,
        )

    def to_description(self) -> dict:
        states: dict[str, dict] = {}
        for name, row in self.rows.items():
            states[name] = {
                "probs": {self.vocab.tokens[i]: float(row.probs[i]) for i in np.nonzero(row.probs)[0]},
                "next": {self.vocab.tokens[t]: st for t, st in sorted(row.next.items())},
            }
        out: dict = {
            "tokens": list(self.vocab.tokens),
            "bos": self.vocab.tokens[self.vocab.bos_id],
            "eos": self.vocab.tokens[self.vocab.eos_id],
            "start": self.start,
            "states": states,
        }
        if self.start_states:
            out["start_states"] = dict(self.start_states)
        if self.summaries:
            out["summaries"] = {k: [float(x) for x in v] for k, v in self.summaries.items()}
        if self.default_summary is not None:
            out["default_summary"] = [float(x) for x in self.default_summary]
        return out


def random_tabular_model(
    seed: int,
    *,
    vocab_size: int = 5,
    n_states: int = 4,
    eos_weight: float = 1.0,
) -> TabularModel:
    """Seeded random fixture: Dirichlet rows over every token except BOS."""
    if vocab_size < 3:
        raise InputError("vocab_size must be >= 3 (BOS, EOS and at least one word)")
    if n_states < 1:
        raise InputError("n_states must be >= 1")
    rng = np.random.default_rng(seed)
    tokens = ["<s>", "</s>"] + [f"w{i}" for i in range(2, vocab_size)]
    names = [f"q{i}" for i in range(n_states)]
    alpha = np.ones(vocab_size - 1, dtype=np.float64)
    alpha[0] = eos_weight
    states: dict[str, dict] = {}
    for name in names:
        p = rng.dirichlet(alpha)
        probs = {"</s>": float(p[0])}
        nxt: dict[str, str] = {}
        for j, tok in enumerate(tokens[2:], start=1):
            probs[tok] = float(p[j])
            nxt[tok] = names[int(rng.integers(n_states))]
        states[name] = {"probs": probs, "next": nxt}
    return TabularModel.from_description({"tokens": tokens, "bos": "<s>", "eos": "</s>", "start": names[0], "states": states})
