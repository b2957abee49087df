"""Estimator facade over the encoder, heads, and training loop."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..corpus import Window
from ..labels import AnswerLabel
from . import encoder, heads
from .params import EncoderConfig, ModelParams, load_checkpoint, save_checkpoint
from .training import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LR,
    DEFAULT_WEIGHT_DECAY,
    train,
)


class SpanExtractor(BaseEstimator):
    """Span/YNN extractor with a fit/predict surface.

    Hyperparameters are stored verbatim; fitted state lives in params_ and
    loss_history_.
    """

    def __init__(
        self,
        layers: int = 2,
        hidden: int = 16,
        heads: int = 2,
        vocab_hash_size: int = 2048,
        max_window_len: int = 384,
        seed: int = 0,
        epochs: int = 10,
        lr: float = DEFAULT_LR,
        weight_decay: float = DEFAULT_WEIGHT_DECAY,
        batch_size: int = DEFAULT_BATCH_SIZE,
    ) -> None:
        self.layers = layers
        self.hidden = hidden
        self.heads = heads
        self.vocab_hash_size = vocab_hash_size
        self.max_window_len = max_window_len
        self.seed = seed
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size

    def _encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            layers=self.layers,
            hidden=self.hidden,
            heads=self.heads,
            vocab_hash_size=self.vocab_hash_size,
            max_window_len=self.max_window_len,
            seed=self.seed,
        )

    def fit(
        self, X: Sequence[Window], y: Sequence[AnswerLabel]
    ) -> "SpanExtractor":
        if len(X) != len(y):
            raise ValueError(
                f"got {len(X)} windows but {len(y)} labels"
            )
        self.params_, self.loss_history_ = train(
            list(zip(X, y)),
            self._encoder_config(),
            epochs=self.epochs,
            lr=self.lr,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this SpanExtractor is not fitted; call fit() or load()"
            )

    def predict_probs(self, window: Window) -> heads.HeadProbs:
        """Start/end/yn probabilities for one window."""
        self._check_fitted()
        result = encoder.encode(self.params_, window)
        logits = heads.heads_forward(self.params_, result.states, result.pooled)
        return heads.probabilities(logits)

    def predict(self, X: Sequence[Window]) -> list[heads.HeadProbs]:
        return [self.predict_probs(window) for window in X]

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        save_checkpoint(self.params_, path)

    @classmethod
    def load(cls, path: str | Path) -> "SpanExtractor":
        return cls.from_params(load_checkpoint(path))

    @classmethod
    def from_params(cls, params: ModelParams) -> "SpanExtractor":
        config = params.config
        est = cls(
            layers=config.layers,
            hidden=config.hidden,
            heads=config.heads,
            vocab_hash_size=config.vocab_hash_size,
            max_window_len=config.max_window_len,
            seed=config.seed,
        )
        est.params_ = params
        est.loss_history_ = []
        return est
