from __future__ import annotations

import dataclasses
import logging
import math
from typing import Any, Sequence

import numpy as np

from .core import ContractError, InputError, SourceSentence, Vocab
from .model_base import ModelStepOutput, SourceSummary, check_source
from .nn import (
    AdamState,
    DenseLayer,
    LstmCell,
    Params,
    adam_step,
    dense_backward,
    dense_forward,
    init_uniform,
    log_softmax,
    lstm_step,
    lstm_step_backward,
    lstm_step_forward,
)

logger = logging.getLogger(__name__)

PARAM_KEYS = ("emb", "enc.W", "enc.b", "dec.W", "dec.b", "out.W", "out.b")


@dataclasses.dataclass(frozen=True)
class NeuralState:
    h: np.ndarray
    c: np.ndarray


@dataclasses.dataclass(frozen=True)
class NeuralModel:
    """Single-layer LSTM decoder whose initial hidden state is the source summary.

    summary = tanh(enc.W @ mean(emb[source]) + enc.b); the decoder starts from
    h = summary, c = 0 and reads the previous token's embedding each step.
    """

    vocab: Vocab
    params: Params

    def __post_init__(self) -> None:
        missing = [k for k in PARAM_KEYS if k not in self.params]
        if missing:
            raise InputError(f"Neural model is missing parameters: {', '.join(missing)}")
        p = {k: np.asarray(self.params[k], dtype=np.float64) for k in PARAM_KEYS}
        object.__setattr__(self, "params", p)
        v = self.vocab.size
        e = p["emb"].shape[1] if p["emb"].ndim == 2 else -1
        d = p["enc.b"].shape[0] if p["enc.b"].ndim == 1 else -1
        expected = {
            "emb": (v, e),
            "enc.W": (d, e),
            "enc.b": (d,),
            "dec.W": (4 * d, e + d),
            "dec.b": (4 * d,),
            "out.W": (v, d),
            "out.b": (v,),
        }
        for k, shape in expected.items():
            if p[k].shape != shape:
                raise InputError(f"Neural model parameter {k!r} has shape {p[k].shape}, expected {shape}")
        if not all(np.all(np.isfinite(a)) for a in p.values()):
            raise InputError("Neural model parameters must be finite")

    @classmethod
    def initialize(cls, vocab: Vocab, *, d_model: int = 16, embed_dim: int | None = None, seed: int = 0) -> NeuralModel:
        if d_model < 1:
            raise InputError(f"d_model must be >= 1, got {d_model}")
        e = d_model if embed_dim is None else int(embed_dim)
        if e < 1:
            raise InputError(f"embed_dim must be >= 1, got {e}")
        rng = np.random.default_rng(seed)
        v = vocab.size
        params = {
            "emb": init_uniform(rng, (v, e)),
            "enc.W": init_uniform(rng, (d_model, e)),
            "enc.b": np.zeros(d_model),
            "dec.W": init_uniform(rng, (4 * d_model, e + d_model)),
            "dec.b": np.zeros(4 * d_model),
            "out.W": init_uniform(rng, (v, d_model)),
            "out.b": np.zeros(v),
        }
        return cls(vocab=vocab, params=params)

    @property
    def summary_dim(self) -> int:
        return int(self.params["enc.b"].shape[0])

    @property
    def embed_dim(self) -> int:
        return int(self.params["emb"].shape[1])

    def encoder_layer(self) -> DenseLayer:
        return DenseLayer(self.params["enc.W"], self.params["enc.b"], "tanh")

    def decoder_cell(self) -> LstmCell:
        return LstmCell(self.params["dec.W"], self.params["dec.b"])

    def output_layer(self) -> DenseLayer:
        return DenseLayer(self.params["out.W"], self.params["out.b"])

    def encode(self, source: SourceSentence) -> tuple[SourceSummary, NeuralState]:
        check_source(self.vocab, source)
        pooled = np.mean(self.params["emb"][list(source.tokens)], axis=0)
        summary, _ = dense_forward(self.encoder_layer(), pooled)
        return SourceSummary(summary), NeuralState(h=summary.copy(), c=np.zeros(self.summary_dim))

    def step(self, state: Any, last_token: int) -> ModelStepOutput:
        if not isinstance(state, NeuralState) or state.h.shape != (self.summary_dim,) or state.c.shape != (self.summary_dim,):
            raise ContractError(f"Invalid neural state handle: {state!r}")
        h, c = lstm_step(self.decoder_cell(), state.h, state.c, self.embed(last_token))
        logits, _ = dense_forward(self.output_layer(), h)
        return ModelStepOutput(logprobs=log_softmax(logits), next_state=NeuralState(h=h, c=c))

    def embed(self, token: int) -> np.ndarray:
        return self.params["emb"][self.vocab.check_id(token)].copy()

    def with_params(self, params: Params) -> NeuralModel:
        return NeuralModel(vocab=self.vocab, params=params)


def sequence_loss(model: NeuralModel, source: SourceSentence, target: Sequence[int]) -> tuple[float, Params]:
    """Teacher-forced cross-entropy of `target` + EOS and its gradients (manual BPTT)."""
    check_source(model.vocab, source)
    vocab = model.vocab
    emb = model.params["emb"]
    enc = model.encoder_layer()
    cell = model.decoder_cell()
    out = model.output_layer()

    src = list(source.tokens)
    pooled = np.mean(emb[src], axis=0)
    summary, enc_cache = dense_forward(enc, pooled)

    gold = [vocab.check_id(t) for t in target] + [vocab.eos_id]
    prev = vocab.bos_id
    h = summary
    c = np.zeros(model.summary_dim)
    loss = 0.0
    trail = []
    for y in gold:
        h, c, lcache = lstm_step_forward(cell, h, c, emb[prev])
        logits, _ = dense_forward(out, h)
        lp = log_softmax(logits)
        loss -= float(lp[y])
        dlogits = np.exp(lp)
        dlogits[y] -= 1.0
        trail.append((prev, h, lcache, dlogits))
        prev = y

    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    dh_next = np.zeros(model.summary_dim)
    dc_next = np.zeros(model.summary_dim)
    for prev_tok, h_t, lcache, dlogits in reversed(trail):
        grads["out.W"] += np.outer(dlogits, h_t)
        grads["out.b"] += dlogits
        dh = out.weight.T @ dlogits + dh_next
        dx, dh_next, dc_next, dW, db = lstm_step_backward(cell, lcache, dh, dc_next)
        grads["dec.W"] += dW
        grads["dec.b"] += db
        grads["emb"][prev_tok] += dx

    # The initial cell state is a constant zero vector, so dc_next stops here.
    dpooled, dW_enc, db_enc = dense_backward(enc, enc_cache, dh_next)
    grads["enc.W"] += dW_enc
    grads["enc.b"] += db_enc
    for tok in src:
        grads["emb"][tok] += dpooled / len(src)
    return loss, grads


def train_neural_model(
    model: NeuralModel,
    pairs: Sequence[tuple[SourceSentence, Sequence[int]]],
    *,
    epochs: int,
    adam: AdamState,
    seed: int = 0,
) -> tuple[NeuralModel, list[float]]:
    """Per-example Adam over a seeded shuffle; returns the trained model and mean loss per epoch."""
    if not pairs:
        raise InputError("Training corpus is empty")
    if epochs < 0:
        raise InputError(f"epochs must be >= 0, got {epochs}")
    rng = np.random.default_rng(seed)
    params = dict(model.params)
    curve: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        for i in order:
            source, target = pairs[int(i)]
            loss, grads = sequence_loss(model.with_params(params), source, target)
            params = adam_step(adam, params, grads)
            total += loss
        mean = total / len(pairs)
        if not math.isfinite(mean):
            raise FloatingPointError(f"Non-finite training loss at epoch {epoch + 1}")
        curve.append(mean)
        logger.info("neural model epoch %d/%d: mean loss %.6f", epoch + 1, epochs, mean)
    return model.with_params(params), curve
