"""Dense network kernels with analytic backward passes.

Layout conventions: a linear map stores ``weight`` with shape (out, in)
and acts on the last axis, so the same call handles a single vector or a
stack of time-step rows. Backward functions take the cache returned by
the matching forward call plus the upstream gradient, and return input
gradients first, parameter gradients after.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LinearParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    @classmethod
    def glorot(cls, n_out: int, n_in: int, rng: np.random.Generator) -> "LinearParams":
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))

    @classmethod
    def zeros(cls, n_out: int, n_in: int) -> "LinearParams":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out))


@dataclass
class AttentionParams:
    w_q: np.ndarray  # (d, d)
    w_k: np.ndarray
    w_v: np.ndarray

    @classmethod
    def glorot(cls, d: int, rng: np.random.Generator) -> "AttentionParams":
        limit = np.sqrt(6.0 / (2 * d))
        return cls(
            rng.uniform(-limit, limit, size=(d, d)),
            rng.uniform(-limit, limit, size=(d, d)),
            rng.uniform(-limit, limit, size=(d, d)),
        )


def linear_forward(x: np.ndarray, p: LinearParams):
    """y = x W^T + b on the last axis; cache is (x, p)."""
    return x @ p.weight.T + p.bias, (x, p)


def linear_backward(cache, dy: np.ndarray):
    x, p = cache
    dx = dy @ p.weight
    if x.ndim == 1:
        dw = np.outer(dy, x)
        db = dy.copy()
    else:
        dw = dy.T @ x
        db = dy.sum(axis=0)
    return dx, dw, db


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * y * (1.0 - y)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (1.0 - y * y)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    dot = (dy * y).sum(axis=-1, keepdims=True)
    return (dy - dot) * y


def attention_forward(h: np.ndarray, p: AttentionParams):
    """Scaled dot-product self-attention over a (T, d) sequence."""
    d = h.shape[1]
    q = h @ p.w_q.T
    k = h @ p.w_k.T
    v = h @ p.w_v.T
    scores = q @ k.T / np.sqrt(d)
    weights = softmax_rows(scores)
    out = weights @ v
    return out, (h, p, q, k, v, weights)


def attention_backward(cache, dout: np.ndarray):
    h, p, q, k, v, weights = cache
    d = h.shape[1]
    dweights = dout @ v.T
    dv = weights.T @ dout
    dscores = softmax_rows_backward(weights, dweights)
    dq = dscores @ k / np.sqrt(d)
    dk = dscores.T @ q / np.sqrt(d)
    dh = dq @ p.w_q + dk @ p.w_k + dv @ p.w_v
    dw_q = dq.T @ h
    dw_k = dk.T @ h
    dw_v = dv.T @ h
    return dh, dw_q, dw_k, dw_v


def dropout_forward(
    x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | None = None
):
    """Inverted dropout. Identity when not training or when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate), mask


def dropout_backward(mask: np.ndarray | None, rate: float, dy: np.ndarray) -> np.ndarray:
    if mask is None:
        return dy
    return dy * mask / (1.0 - rate)


def huber_loss(y_true: np.ndarray, y_pred: np.ndarray, delta: float = 1.0):
    """Mean Huber loss and its gradient with respect to y_pred.

    Quadratic inside |error| <= delta, linear outside, so the loss and its
    first derivative are both continuous at the switch.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    err = y_pred - y_true
    small = np.abs(err) <= delta
    per_elem = np.where(small, 0.5 * err * err, delta * (np.abs(err) - 0.5 * delta))
    grad = np.where(small, err, delta * np.sign(err)) / err.size
    return float(per_elem.mean()), grad


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int = 0


def adam_init(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        {k: np.zeros_like(v) for k, v in params.items()},
        {k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction; returns fresh arrays."""
    if set(params) != set(grads):
        raise KeyError("params and grads must hold the same tensor names")
    t = state.step_count + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, value in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for '{name}'")
        m = beta1 * state.first_moment[name] + (1.0 - beta1) * g
        v = beta2 * state.second_moment[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)
