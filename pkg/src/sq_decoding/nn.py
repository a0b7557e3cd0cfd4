from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from .core import ContractError, GaussianParams

ACTIVATIONS = ("identity", "tanh")

Params = dict[str, np.ndarray]


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape).astype(np.float64)


def softplus(x):
    # logaddexp(0, x) == x + log1p(exp(-x)) for large x, never overflows.
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


softplus_grad = sigmoid


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z)
    shifted = z - m
    return shifted - math.log(float(np.sum(np.exp(shifted))))


@dataclasses.dataclass(frozen=True)
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"Unknown activation: {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ContractError(f"Dense layer shapes disagree: weight {self.weight.shape}, bias {self.bias.shape}")

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclasses.dataclass(frozen=True)
class DenseCache:
    x: np.ndarray
    y: np.ndarray


def dense_forward(layer: DenseLayer, x: np.ndarray) -> tuple[np.ndarray, DenseCache]:
    if x.shape != (layer.in_dim,):
        raise ContractError(f"Dense layer expects input of shape ({layer.in_dim},), got {x.shape}")
    z = layer.weight @ x + layer.bias
    y = np.tanh(z) if layer.activation == "tanh" else z
    return y, DenseCache(x=x, y=y)


def dense_backward(layer: DenseLayer, cache: DenseCache, dy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dweight, dbias)."""
    dz = dy * (1.0 - cache.y * cache.y) if layer.activation == "tanh" else dy
    return layer.weight.T @ dz, np.outer(dz, cache.x), dz


@dataclasses.dataclass(frozen=True)
class LstmCell:
    # Gate blocks stacked along axis 0 in the order: input, forget, output, candidate.
    weight: np.ndarray  # (4d, in + d)
    bias: np.ndarray  # (4d,)

    def __post_init__(self) -> None:
        rows = self.bias.shape[0] if self.bias.ndim == 1 else -1
        if rows <= 0 or rows % 4 != 0 or self.weight.ndim != 2 or self.weight.shape[0] != rows:
            raise ContractError(f"LSTM shapes disagree: weight {self.weight.shape}, bias {self.bias.shape}")
        if self.weight.shape[1] <= rows // 4:
            raise ContractError("LSTM weight has no input columns")

    @property
    def hidden_size(self) -> int:
        return int(self.bias.shape[0] // 4)

    @property
    def input_size(self) -> int:
        return int(self.weight.shape[1] - self.hidden_size)


@dataclasses.dataclass(frozen=True)
class LstmCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def lstm_step_forward(cell: LstmCell, h_prev: np.ndarray, c_prev: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, LstmCache]:
    d = cell.hidden_size
    if h_prev.shape != (d,) or c_prev.shape != (d,) or x.shape != (cell.input_size,):
        raise ContractError(
            f"LSTM step shapes disagree: h {h_prev.shape}, c {c_prev.shape}, x {x.shape} for hidden={d}, input={cell.input_size}"
        )
    z = cell.weight @ np.concatenate([x, h_prev]) + cell.bias
    i = sigmoid(z[0:d])
    f = sigmoid(z[d : 2 * d])
    o = sigmoid(z[2 * d : 3 * d])
    g = np.tanh(z[3 * d : 4 * d])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, LstmCache(x=x, h_prev=h_prev, c_prev=c_prev, i=i, f=f, o=o, g=g, tanh_c=tanh_c)


def lstm_step(cell: LstmCell, h_prev: np.ndarray, c_prev: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, c, _ = lstm_step_forward(cell, h_prev, c_prev, x)
    return h, c


def lstm_step_backward(
    cell: LstmCell, cache: LstmCache, dh: np.ndarray, dc: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dh_prev, dc_prev, dweight, dbias) for one step."""
    dc_total = dc + dh * cache.o * (1.0 - cache.tanh_c * cache.tanh_c)
    do = dh * cache.tanh_c
    di = dc_total * cache.g
    dg = dc_total * cache.i
    df = dc_total * cache.c_prev
    dc_prev = dc_total * cache.f
    dz = np.concatenate(
        [
            di * cache.i * (1.0 - cache.i),
            df * cache.f * (1.0 - cache.f),
            do * cache.o * (1.0 - cache.o),
            dg * (1.0 - cache.g * cache.g),
        ]
    )
    xh = np.concatenate([cache.x, cache.h_prev])
    dxh = cell.weight.T @ dz
    n_in = cell.input_size
    return dxh[:n_in], dxh[n_in:], dc_prev, np.outer(dz, xh), dz


def gaussian_nll(x: float, g: GaussianParams) -> float:
    var = g.sigma * g.sigma
    return 0.5 * math.log(2.0 * math.pi * var) + (x - g.mu) ** 2 / (2.0 * var)


def gaussian_nll_grad(x: float, g: GaussianParams) -> tuple[float, float]:
    """Returns (d nll / d mu, d nll / d sigma)."""
    diff = x - g.mu
    return -diff / (g.sigma * g.sigma), 1.0 / g.sigma - diff * diff / (g.sigma**3)


@dataclasses.dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Params = dataclasses.field(default_factory=dict)
    v: Params = dataclasses.field(default_factory=dict)


def adam_step(state: AdamState, params: Params, grads: Params) -> Params:
    """One bias-corrected Adam update; returns new arrays and advances `state.t`.

    A parameter whose gradient is missing or entirely zero is left untouched and its
    moments are not decayed, so a zero gradient is the identity for any state.
    """
    for k, g in grads.items():
        if k not in params:
            raise ContractError(f"Gradient for unknown parameter: {k!r}")
        if g.shape != params[k].shape:
            raise ContractError(f"Gradient shape {g.shape} does not match parameter {k!r} shape {params[k].shape}")

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    out: Params = {}
    for k, p in params.items():
        g = grads.get(k)
        if g is None or not np.any(g):
            out[k] = p.copy()
            continue
        m = state.m.get(k)
        v = state.v.get(k)
        if m is None or v is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[k] = m
        state.v[k] = v
        out[k] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return out


def check_gradients(
    f: Callable[[Params], tuple[float, Params]],
    params: Params,
    h: float = 1e-5,
    *,
    atol: float = 0.0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` returns (value, analytic gradients). Components whose absolute disagreement is
    at most `atol` count as exact matches.
    """
    _, analytic = f(params)
    worst = 0.0
    for name, p in params.items():
        grad = analytic.get(name)
        for idx in np.ndindex(p.shape):
            values = []
            for sign in (1.0, -1.0):
                bumped = p.copy()
                bumped[idx] += sign * h
                trial = dict(params)
                trial[name] = bumped
                val, _ = f(trial)
                if not math.isfinite(val):
                    raise FloatingPointError(f"Non-finite objective {val} at {name}{list(idx)} {'+' if sign > 0 else '-'}h")
                values.append(val)
            numeric = (values[0] - values[1]) / (2.0 * h)
            ana = float(grad[idx]) if grad is not None else 0.0
            diff = abs(ana - numeric)
            if diff <= atol:
                continue
            worst = max(worst, diff / max(1e-8, abs(ana) + abs(numeric)))
    return worst
