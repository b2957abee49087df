"""AdamW training loop over labeled windows.

Single-threaded and deterministic: one seed fixes initialization, shuffling,
and therefore the whole parameter trajectory.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..corpus import Window
from ..errors import TrainingDivergedError
from ..labels import AnswerLabel
from . import encoder, heads
from .params import EncoderConfig, ModelParams, init_params, zeros_like_params

DEFAULT_LR = 1e-3
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_BATCH_SIZE = 8


def example_loss(params: ModelParams, ids: np.ndarray, label: AnswerLabel) -> float:
    """Forward-only loss for one window; the finite-difference target."""
    cache = encoder.forward(params, ids)
    logits = heads.heads_forward(params, cache.states, cache.pooled)
    return heads.loss(logits, label)


def example_loss_and_grads(
    params: ModelParams, ids: np.ndarray, label: AnswerLabel
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss plus analytic gradients for every tensor, for one window."""
    cache = encoder.forward(params, ids)
    logits = heads.heads_forward(params, cache.states, cache.pooled)
    value = heads.loss(logits, label)
    grads = zeros_like_params(params)
    d_logits = heads.loss_grad(logits, label)
    d_states, d_pooled = heads.heads_backward(
        params, cache.states, cache.pooled, d_logits, grads
    )
    encoder.backward(params, cache, d_states, d_pooled, grads)
    return value, grads


class AdamW:
    """Decoupled weight decay variant of Adam, operating on tensor dicts."""

    def __init__(
        self,
        params: ModelParams,
        lr: float,
        weight_decay: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, p in params.tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            # Single combined delta: with lr=0 the subtraction is an exact no-op.
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps)
                            + self.weight_decay * p)


def train(
    examples: Sequence[tuple[Window, AnswerLabel]],
    config: EncoderConfig,
    *,
    epochs: int = 10,
    lr: float = DEFAULT_LR,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> tuple[ModelParams, list[float]]:
    """Fits a fresh model to the examples; returns (params, per-epoch mean loss)."""
    if not examples:
        raise ValueError("need at least one training example")
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")

    params = init_params(config)
    prepared = []
    for window, label in examples:
        label.validate_for_length(len(window))
        prepared.append((encoder.window_token_ids(params, window), label))

    optimizer = AdamW(params, lr=lr, weight_decay=weight_decay)
    shuffle_rng = np.random.default_rng(config.seed)
    n = len(prepared)
    history: list[float] = []

    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            batch = [prepared[i] for i in order[lo:lo + batch_size]]
            grads = zeros_like_params(params)
            batch_loss = 0.0
            for ids, label in batch:
                value, g = example_loss_and_grads(params, ids, label)
                batch_loss += value
                for name in grads:
                    grads[name] += g[name]
            inv = 1.0 / len(batch)
            for name in grads:
                grads[name] *= inv
            batch_loss = float(batch_loss * inv)
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {lo // batch_size}; "
                    f"try a lower learning rate (lr={lr})"
                )
            optimizer.step(params, grads)
            total += batch_loss * len(batch)
        history.append(total / n)

    params.check_finite()
    return params, history
