"""Finite-difference verification of the analytic gradients."""

from __future__ import annotations

import pytest

from conftest import one_window, toy_config
from corpusqa.extractor import grad_check, init_params
from corpusqa.extractor.encoder import window_token_ids
from corpusqa.extractor.training import example_loss_and_grads
from corpusqa.labels import AnswerLabel

_HEAD_TENSORS = (
    "start_head.w", "start_head.b", "end_head.w", "end_head.b",
    "yn_head.w", "yn_head.b",
)


@pytest.fixture(scope="module")
def setup():
    config = toy_config(layers=1, hidden=8, heads=2, vocab_hash_size=128,
                        max_window_len=16)
    params = init_params(config)
    _, window = one_window("amber falcon maps onto the misty harbor basin")
    label = AnswerLabel.span(0, 1, "none")
    return params, (window, label)


class TestGradCheck:
    def test_full_model_under_tolerance(self, setup):
        params, datapoint = setup
        worst = grad_check(params, datapoint, eps=1e-5, budget=250, seed=0)
        assert worst < 1e-4

    def test_heads_only_much_tighter(self, setup):
        params, datapoint = setup
        worst = grad_check(
            params, datapoint, eps=1e-5, tensor_names=_HEAD_TENSORS, budget=100
        )
        assert worst < 1e-6

    def test_detects_corrupted_gradients(self, setup):
        params, (window, label) = setup
        ids = window_token_ids(params, window)
        _, grads = example_loss_and_grads(params, ids, label)
        grads["end_head.w"] = grads["end_head.w"] + 0.05
        worst = grad_check(
            params, (window, label), eps=1e-5,
            tensor_names=("end_head.w",), analytic_grads=grads,
        )
        assert worst > 1e-2

    def test_eps_validation(self, setup):
        params, datapoint = setup
        with pytest.raises(ValueError):
            grad_check(params, datapoint, eps=0.0)

    def test_unknown_tensor_name(self, setup):
        params, datapoint = setup
        with pytest.raises(KeyError):
            grad_check(params, datapoint, tensor_names=("nope.w",))

    def test_bad_label_rejected(self, setup):
        params, (window, _) = setup
        with pytest.raises(ValueError):
            grad_check(params, (window, AnswerLabel.span(0, 99, "none")))

    def test_coordinate_sample_is_seeded(self, setup):
        params, datapoint = setup
        a = grad_check(params, datapoint, budget=60, seed=5)
        b = grad_check(params, datapoint, budget=60, seed=5)
        assert a == b
