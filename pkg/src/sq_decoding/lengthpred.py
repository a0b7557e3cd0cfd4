"""Gaussian length predictor: an encoder head on the source summary and an LSTM decoder head over the hypothesis.

Both heads give (mu, softplus sigma) over the final length, EOS included.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import Any, Sequence

import numpy as np

from .core import SIGMA_FLOOR, ContractError, GaussianParams, Hypothesis, InputError, ScoreConfig, SourceSentence
from .model_base import SequenceModel, SourceSummary
from .nn import (
    AdamState,
    DenseLayer,
    LstmCell,
    Params,
    adam_step,
    dense_backward,
    dense_forward,
    gaussian_nll,
    gaussian_nll_grad,
    init_uniform,
    lstm_step,
    lstm_step_backward,
    lstm_step_forward,
    softplus,
    softplus_grad,
)

logger = logging.getLogger(__name__)

ENCODER_KEYS = ("fe.W1", "fe.b1", "fe.W2", "fe.b2")
DECODER_KEYS = ("lstm.W", "lstm.b", "fd.W1", "fd.b1", "fd.W2", "fd.b2")
PROJECTION_KEY = "proj.W"


@dataclasses.dataclass(frozen=True)
class LengthPredictorParams:
    theta_e: Params
    theta_d: Params
    summary_dim: int
    embed_dim: int
    hidden_size: int

    def __post_init__(self) -> None:
        s, e, d = self.summary_dim, self.embed_dim, self.hidden_size
        if min(s, e, d) < 1:
            raise ContractError(f"Predictor dimensions must be >= 1, got summary={s}, embed={e}, hidden={d}")
        expected_e = {"fe.W1": (d, s), "fe.b1": (d,), "fe.W2": (2, d), "fe.b2": (2,)}
        expected_d = {
            "lstm.W": (4 * d, e + d),
            "lstm.b": (4 * d,),
            "fd.W1": (d, d),
            "fd.b1": (d,),
            "fd.W2": (2, d),
            "fd.b2": (2,),
        }
        if s != d:
            expected_d[PROJECTION_KEY] = (d, s)
        for group, expected in ((self.theta_e, expected_e), (self.theta_d, expected_d)):
            if set(group) != set(expected):
                raise ContractError(f"Predictor parameter keys {sorted(group)} do not match {sorted(expected)}")
            for k, shape in expected.items():
                if np.shape(group[k]) != shape:
                    raise ContractError(f"Predictor parameter {k!r} has shape {np.shape(group[k])}, expected {shape}")

    @property
    def has_projection(self) -> bool:
        return PROJECTION_KEY in self.theta_d

    def flat(self) -> Params:
        return {**self.theta_e, **self.theta_d}

    def from_flat(self, flat: Params) -> LengthPredictorParams:
        return dataclasses.replace(
            self,
            theta_e={k: flat[k] for k in self.theta_e},
            theta_d={k: flat[k] for k in self.theta_d},
        )


@dataclasses.dataclass(frozen=True)
class PredictorState:
    h: np.ndarray
    c: np.ndarray
    gaussian: GaussianParams


@dataclasses.dataclass(frozen=True)
class TrainingExample:
    source: SourceSentence
    gold_length: int
    greedy_output: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.gold_length < 1:
            raise InputError(f"gold_length must be >= 1, got {self.gold_length}")
        object.__setattr__(self, "greedy_output", tuple(int(t) for t in self.greedy_output))


def init_predictor_params(summary_dim: int, embed_dim: int, *, hidden_size: int = 16, seed: int = 0) -> LengthPredictorParams:
    rng = np.random.default_rng(seed)
    d = hidden_size
    theta_e = {
        "fe.W1": init_uniform(rng, (d, summary_dim)),
        "fe.b1": np.zeros(d),
        "fe.W2": init_uniform(rng, (2, d)),
        "fe.b2": np.zeros(2),
    }
    theta_d = {
        "lstm.W": init_uniform(rng, (4 * d, embed_dim + d)),
        "lstm.b": np.zeros(4 * d),
        "fd.W1": init_uniform(rng, (d, d)),
        "fd.b1": np.zeros(d),
        "fd.W2": init_uniform(rng, (2, d)),
        "fd.b2": np.zeros(2),
    }
    if summary_dim != d:
        theta_d[PROJECTION_KEY] = init_uniform(rng, (d, summary_dim))
    return LengthPredictorParams(theta_e=theta_e, theta_d=theta_d, summary_dim=summary_dim, embed_dim=embed_dim, hidden_size=d)


def _gaussian_from_output(v: np.ndarray) -> GaussianParams:
    return GaussianParams.floored(float(v[0]), float(softplus(float(v[1]))))


def _output_grad(v: np.ndarray, dmu: float, dsigma: float) -> np.ndarray:
    # The floor is a clamp: no gradient flows through it.
    raw = float(softplus(float(v[1])))
    dv1 = dsigma * float(softplus_grad(float(v[1]))) if raw >= SIGMA_FLOOR else 0.0
    return np.array([dmu, dv1])


def _head_layers(p: Params, prefix: str) -> tuple[DenseLayer, DenseLayer]:
    return (
        DenseLayer(p[f"{prefix}.W1"], p[f"{prefix}.b1"], "tanh"),
        DenseLayer(p[f"{prefix}.W2"], p[f"{prefix}.b2"]),
    )


def _head_forward(p: Params, prefix: str, x: np.ndarray):
    hidden, out = _head_layers(p, prefix)
    a, c1 = dense_forward(hidden, x)
    v, c2 = dense_forward(out, a)
    return v, (c1, c2)


def _head_backward(p: Params, prefix: str, caches, dv: np.ndarray, grads: Params) -> np.ndarray:
    hidden, out = _head_layers(p, prefix)
    c1, c2 = caches
    da, dW2, db2 = dense_backward(out, c2, dv)
    dx, dW1, db1 = dense_backward(hidden, c1, da)
    grads[f"{prefix}.W2"] += dW2
    grads[f"{prefix}.b2"] += db2
    grads[f"{prefix}.W1"] += dW1
    grads[f"{prefix}.b1"] += db1
    return dx


def _check_summary(params: LengthPredictorParams, summary: SourceSummary) -> np.ndarray:
    if summary.dim != params.summary_dim:
        raise ContractError(f"Summary dimension {summary.dim} does not match predictor summary_dim {params.summary_dim}")
    return summary.vector


def _projected_summary(params: LengthPredictorParams, summary: SourceSummary) -> np.ndarray:
    vec = _check_summary(params, summary)
    if params.has_projection:
        return params.theta_d[PROJECTION_KEY] @ vec
    return vec


def encoder_head(params: LengthPredictorParams, summary: SourceSummary) -> GaussianParams:
    v, _ = _head_forward(params.theta_e, "fe", _check_summary(params, summary))
    return _gaussian_from_output(v)


def initial_predictor_state(params: LengthPredictorParams, summary: SourceSummary) -> PredictorState:
    d = params.hidden_size
    v, _ = _head_forward(params.theta_d, "fd", _projected_summary(params, summary))
    return PredictorState(h=np.zeros(d), c=np.zeros(d), gaussian=_gaussian_from_output(v))


def predictor_step(
    params: LengthPredictorParams,
    state: PredictorState,
    token_embedding: np.ndarray,
    summary: SourceSummary,
) -> PredictorState:
    if np.shape(token_embedding) != (params.embed_dim,):
        raise ContractError(f"Token embedding shape {np.shape(token_embedding)} does not match embed_dim {params.embed_dim}")
    cell = LstmCell(params.theta_d["lstm.W"], params.theta_d["lstm.b"])
    h, c = lstm_step(cell, state.h, state.c, np.asarray(token_embedding, dtype=np.float64))
    v, _ = _head_forward(params.theta_d, "fd", h + _projected_summary(params, summary))
    return PredictorState(h=h, c=c, gaussian=_gaussian_from_output(v))


def lms(d: GaussianParams, e: GaussianParams, mode: str = "expectation") -> float:
    """Cross-entropy between the decoder-head and encoder-head Gaussians.

    `expectation` is E_{x~d}[-ln N(x; e)]. `as_printed` swaps the roles of d and e.
    """
    if mode == "expectation":
        ref, other = e, d
    elif mode == "as_printed":
        ref, other = d, e
    else:
        raise ContractError(f"Unknown lms mode: {mode!r}")
    var = ref.sigma * ref.sigma
    return 0.5 * math.log(2.0 * math.pi * var) + (other.sigma**2 + (other.mu - ref.mu) ** 2) / (2.0 * var)


def lmp(h: Hypothesis, state: PredictorState, e: GaussianParams, cfg: ScoreConfig) -> float:
    if not cfg.lmp_enabled:
        raise ContractError("lmp called with the length-matching penalty disabled")
    if h.finished:
        return 0.0
    return cfg.gamma if lms(state.gaussian, e, cfg.lms_mode) > cfg.tau else 0.0


def loss_j(params: LengthPredictorParams, example: TrainingExample, model: SequenceModel) -> tuple[float, Params]:
    """nll(L*; encoder head) + mean over steps of nll(L; decoder head), with gradients.

    Gradients cover the predictor parameters only; the base model is read, never updated.
    """
    tokens = example.greedy_output
    if not tokens:
        raise InputError("Training example has an empty greedy output")
    n = len(tokens)
    L = float(n)
    grads = {k: np.zeros_like(v) for k, v in params.flat().items()}

    summary, _ = model.encode(example.source)
    s = _check_summary(params, summary)
    ve, e_caches = _head_forward(params.theta_e, "fe", s)
    e = _gaussian_from_output(ve)
    loss = gaussian_nll(float(example.gold_length), e)
    dmu, dsigma = gaussian_nll_grad(float(example.gold_length), e)
    _head_backward(params.theta_e, "fe", e_caches, _output_grad(ve, dmu, dsigma), grads)

    td = params.theta_d
    cell = LstmCell(td["lstm.W"], td["lstm.b"])
    sp = _projected_summary(params, summary)
    h = np.zeros(params.hidden_size)
    c = np.zeros(params.hidden_size)
    trail = []
    for tok in tokens:
        h, c, lcache = lstm_step_forward(cell, h, c, np.asarray(model.embed(tok), dtype=np.float64))
        vd, d_caches = _head_forward(td, "fd", h + sp)
        g = _gaussian_from_output(vd)
        loss += gaussian_nll(L, g) / n
        dmu, dsigma = gaussian_nll_grad(L, g)
        trail.append((lcache, vd, d_caches, dmu / n, dsigma / n))

    dsp = np.zeros(params.hidden_size)
    dh_next = np.zeros(params.hidden_size)
    dc_next = np.zeros(params.hidden_size)
    for lcache, vd, d_caches, dmu, dsigma in reversed(trail):
        du = _head_backward(td, "fd", d_caches, _output_grad(vd, dmu, dsigma), grads)
        dsp += du
        _, dh_next, dc_next, dW, db = lstm_step_backward(cell, lcache, du + dh_next, dc_next)
        grads["lstm.W"] += dW
        grads["lstm.b"] += db
    if params.has_projection:
        grads[PROJECTION_KEY] += np.outer(dsp, s)
    return loss, grads


def train(
    params: LengthPredictorParams,
    corpus: Sequence[TrainingExample],
    *,
    epochs: int,
    adam: AdamState,
    model: SequenceModel,
    seed: int = 0,
) -> tuple[LengthPredictorParams, list[float]]:
    """One Adam step per example in a seeded shuffled order; returns mean loss per epoch."""
    if not corpus:
        raise InputError("Length-predictor training corpus is empty")
    if epochs < 0:
        raise InputError(f"epochs must be >= 0, got {epochs}")
    rng = np.random.default_rng(seed)
    flat = params.flat()
    curve: list[float] = []
    for epoch in range(epochs):
        total = 0.0
        for i in rng.permutation(len(corpus)):
            loss, grads = loss_j(params.from_flat(flat), corpus[int(i)], model)
            flat = adam_step(adam, flat, grads)
            total += loss
        mean = total / len(corpus)
        if not math.isfinite(mean):
            raise FloatingPointError(f"Non-finite length-predictor loss at epoch {epoch + 1}")
        curve.append(mean)
        logger.info("length predictor epoch %d/%d: mean J %.6f", epoch + 1, epochs, mean)
    return params.from_flat(flat), curve


def build_training_examples(
    model: SequenceModel,
    pairs: Sequence[tuple[SourceSentence, Sequence[int]]],
    *,
    max_steps: int = 150,
) -> list[TrainingExample]:
    """Greedy-decodes each source; gold length is the target length plus EOS."""
    from .search_beam import greedy_decode

    examples = []
    for source, target in pairs:
        result = greedy_decode(model, source, max_steps=max_steps)
        if result.fallback:
            logger.debug("greedy decode hit max_steps=%d without EOS; using the unfinished output", max_steps)
        examples.append(TrainingExample(source=source, gold_length=len(target) + 1, greedy_output=result.best.tokens))
    return examples


@dataclasses.dataclass(frozen=True)
class LengthPredictor:
    params: LengthPredictorParams

    @property
    def summary_dim(self) -> int:
        return self.params.summary_dim

    @property
    def embed_dim(self) -> int:
        return self.params.embed_dim

    def start(self, summary: SourceSummary) -> tuple[GaussianParams, PredictorState]:
        return encoder_head(self.params, summary), initial_predictor_state(self.params, summary)

    def advance(self, state: PredictorState, embedding: np.ndarray, summary: SourceSummary) -> PredictorState:
        return predictor_step(self.params, state, embedding, summary)


def predictor_to_dict(params: LengthPredictorParams) -> dict[str, Any]:
    return {
        "summary_dim": params.summary_dim,
        "embed_dim": params.embed_dim,
        "hidden_size": params.hidden_size,
        "params": {k: np.asarray(v).tolist() for k, v in sorted(params.flat().items())},
    }


def predictor_from_dict(data: dict[str, Any]) -> LengthPredictorParams:
    try:
        flat = {str(k): np.asarray(v, dtype=np.float64) for k, v in dict(data["params"]).items()}
        theta_e = {k: flat[k] for k in ENCODER_KEYS}
        theta_d = {k: flat[k] for k in DECODER_KEYS}
        if PROJECTION_KEY in flat:
            theta_d[PROJECTION_KEY] = flat[PROJECTION_KEY]
        return LengthPredictorParams(
            theta_e=theta_e,
            theta_d=theta_d,
            summary_dim=int(data["summary_dim"]),
            embed_dim=int(data["embed_dim"]),
            hidden_size=int(data["hidden_size"]),
        )
    except (KeyError, TypeError, ValueError, ContractError) as e:
        raise InputError(f"Invalid length_predictor section: {e}") from e
