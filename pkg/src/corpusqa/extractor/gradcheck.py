"""Central finite-difference verification of the analytic gradients.

The analytic gradients are computed in double precision, exactly as training
uses them. The finite-difference side runs the same loss code on an
extended-precision copy of the parameters (80-bit on x86), so cancellation
noise in f(θ+eps) − f(θ−eps) stays far below the comparison tolerance even
for coordinates with tiny gradients. On platforms where long double equals
double the check still runs, just with a noisier oracle.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from ..corpus import Window
from ..labels import AnswerLabel
from .encoder import window_token_ids
from .params import ModelParams
from .training import example_loss, example_loss_and_grads

# Floor inside the relative-error denominator; keeps near-zero pairs benign.
_DENOM_FLOOR = 1e-8


def _pick_coords(
    params: ModelParams,
    tensor_names: Sequence[str],
    budget: int,
    seed: int,
) -> list[tuple[str, int]]:
    """Seeded coordinate sample covering every tensor, >= budget total
    (or every coordinate when there are fewer than that)."""
    sizes = {name: params.tensors[name].size for name in tensor_names}
    total = sum(sizes.values())
    if total <= budget:
        return [(name, i) for name in tensor_names for i in range(sizes[name])]
    rng = np.random.default_rng(seed)
    coords: list[tuple[str, int]] = []
    for name in tensor_names:
        size = sizes[name]
        quota = min(size, max(4, math.ceil(budget * size / total)))
        for i in rng.choice(size, size=quota, replace=False):
            coords.append((name, int(i)))
    return coords


def grad_check(
    params: ModelParams,
    datapoint: tuple[Window, AnswerLabel],
    eps: float = 1e-5,
    *,
    budget: int = 1000,
    seed: int = 0,
    tensor_names: Sequence[str] | None = None,
    analytic_grads: Mapping[str, np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic and numeric gradients of the loss.

    tensor_names restricts the check to a subset of tensors (e.g. heads only);
    analytic_grads substitutes externally supplied gradients, which lets tests
    confirm the check actually fires on corrupted values.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    window, label = datapoint
    ids = window_token_ids(params, window)
    label.validate_for_length(len(window))

    if analytic_grads is None:
        _, analytic_grads = example_loss_and_grads(params, ids, label)
    names = list(tensor_names) if tensor_names is not None else params.names()
    for name in names:
        if name not in params.tensors:
            raise KeyError(f"unknown tensor {name!r}")

    wide = ModelParams(
        params.config,
        {name: t.astype(np.longdouble) for name, t in params.tensors.items()},
    )
    eps_wide = np.longdouble(eps)

    worst = 0.0
    for name, flat_index in _pick_coords(params, names, budget, seed):
        tensor = wide.tensors[name]
        original = tensor.flat[flat_index]
        tensor.flat[flat_index] = original + eps_wide
        loss_plus = example_loss(wide, ids, label)
        tensor.flat[flat_index] = original - eps_wide
        loss_minus = example_loss(wide, ids, label)
        tensor.flat[flat_index] = original
        numeric = float((loss_plus - loss_minus) / (2.0 * eps_wide))
        analytic = analytic_grads[name].flat[flat_index]
        denom = max(_DENOM_FLOOR, abs(analytic) + abs(numeric))
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
