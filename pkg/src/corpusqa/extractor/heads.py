"""Prediction heads and the joint training loss.

The loss is computed from logits throughout (log1p/logsumexp forms), so large
magnitudes never overflow and the analytic gradients stay exact. Like the
encoder, everything here is dtype-generic numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import YNN_INDEX, AnswerLabel
from .encoder import softmax
from .params import ModelParams


def sigmoid(f: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function, stable for |f| up to 1e4 and beyond."""
    z = np.exp(-np.abs(f))
    return np.where(f >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _logsumexp(f: np.ndarray):
    m = f.max()
    return m + np.log(np.exp(f - m).sum())


@dataclass(frozen=True)
class HeadLogits:
    start: np.ndarray   # (n,) per-position span-start logits
    end: np.ndarray     # (n,) per-position span-end logits
    yn: np.ndarray      # (3,) yes/no/none logits from the pooled state


@dataclass(frozen=True)
class HeadProbs:
    start: np.ndarray   # sigmoid of start logits
    end: np.ndarray     # sigmoid of end logits
    yn: np.ndarray      # softmax over (yes, no, none)


def heads_forward(
    params: ModelParams, states: np.ndarray, pooled: np.ndarray
) -> HeadLogits:
    t = params.tensors
    return HeadLogits(
        start=states @ t["start_head.w"] + t["start_head.b"],
        end=states @ t["end_head.w"] + t["end_head.b"],
        yn=t["yn_head.w"] @ pooled + t["yn_head.b"],
    )


def probabilities(logits: HeadLogits) -> HeadProbs:
    return HeadProbs(
        start=sigmoid(logits.start),
        end=sigmoid(logits.end),
        yn=softmax(logits.yn),
    )


def _multi_hot(positions: frozenset[int], n: int) -> np.ndarray:
    y = np.zeros(n)
    if positions:
        y[sorted(positions)] = 1.0
    return y


def _bce_from_logits(f: np.ndarray, y: np.ndarray):
    per_pos = np.maximum(f, 0.0) - f * y + np.log1p(np.exp(-np.abs(f)))
    return per_pos.mean()


def loss(logits: HeadLogits, label: AnswerLabel) -> float:
    """Mean of the three head losses: two position-wise BCEs and the 3-way CE.

    Returns a numpy scalar in the dtype of the logits, so extended-precision
    inputs yield an extended-precision loss.
    """
    n = logits.start.shape[0]
    bce_start = _bce_from_logits(logits.start, _multi_hot(label.start_positions, n))
    bce_end = _bce_from_logits(logits.end, _multi_hot(label.end_positions, n))
    yn_index = YNN_INDEX[label.yn]
    ce_yn = _logsumexp(logits.yn) - logits.yn[yn_index]
    return (bce_start + bce_end + ce_yn) / 3.0


def loss_grad(logits: HeadLogits, label: AnswerLabel) -> HeadLogits:
    """Gradient of loss() with respect to each logit, packed like HeadLogits."""
    n = logits.start.shape[0]
    d_start = (sigmoid(logits.start) - _multi_hot(label.start_positions, n)) / (
        3.0 * n
    )
    d_end = (sigmoid(logits.end) - _multi_hot(label.end_positions, n)) / (3.0 * n)
    d_yn = softmax(logits.yn) / 3.0
    d_yn[YNN_INDEX[label.yn]] -= 1.0 / 3.0
    return HeadLogits(start=d_start, end=d_end, yn=d_yn)


def heads_backward(
    params: ModelParams,
    states: np.ndarray,
    pooled: np.ndarray,
    d_logits: HeadLogits,
    grads: dict[str, np.ndarray],
):
    """Accumulates head gradients into grads; returns (d_states, d_pooled)."""
    t = params.tensors
    grads["start_head.w"] += states.T @ d_logits.start
    grads["start_head.b"] += d_logits.start.sum()
    grads["end_head.w"] += states.T @ d_logits.end
    grads["end_head.b"] += d_logits.end.sum()
    grads["yn_head.w"] += np.outer(d_logits.yn, pooled)
    grads["yn_head.b"] += d_logits.yn
    d_states = (
        np.outer(d_logits.start, t["start_head.w"])
        + np.outer(d_logits.end, t["end_head.w"])
    )
    d_pooled = t["yn_head.w"].T @ d_logits.yn
    return d_states, d_pooled
