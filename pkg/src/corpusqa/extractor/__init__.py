"""Neural span/YNN extractor: encoder, heads, training, gradient checking."""

from .encoder import EncodeResult, encode, window_token_ids
from .estimator import SpanExtractor
from .gradcheck import grad_check
from .heads import HeadLogits, HeadProbs, heads_forward, loss, loss_grad, probabilities
from .params import (
    EncoderConfig,
    ModelParams,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .training import train

__all__ = [
    "EncodeResult",
    "EncoderConfig",
    "HeadLogits",
    "HeadProbs",
    "ModelParams",
    "SpanExtractor",
    "encode",
    "grad_check",
    "heads_forward",
    "init_params",
    "load_checkpoint",
    "loss",
    "loss_grad",
    "probabilities",
    "save_checkpoint",
    "train",
    "window_token_ids",
]
