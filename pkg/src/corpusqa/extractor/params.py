"""Model configuration, parameter tensors, and checkpoint persistence."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

_CKPT_MAGIC = b"CQACKPT"
_CKPT_VERSION = 1

# Initial scale for embeddings and weight matrices.
_INIT_STD = 0.02


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the encoder stand-in.

    layers/hidden/heads mirror the usual transformer sizing knobs; tokens are
    mapped to embedding rows by a stable hash modulo vocab_hash_size.
    """

    layers: int = 2
    hidden: int = 16
    heads: int = 2
    vocab_hash_size: int = 2048
    max_window_len: int = 384
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("layers", "hidden", "heads", "vocab_hash_size", "max_window_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden % self.heads != 0:
            raise ValueError(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})"
            )

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @property
    def ffn_dim(self) -> int:
        return 4 * self.hidden


@lru_cache(maxsize=1 << 16)
def token_id(surface: str, vocab_hash_size: int) -> int:
    """Stable token hash, identical across runs and platforms."""
    digest = hashlib.blake2b(surface.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % vocab_hash_size


@dataclass
class ModelParams:
    """All trainable tensors, keyed by name, plus the config they belong to.

    Tensor dict order is the canonical parameter order used by the optimizer
    and the gradient checker. Everything is float64.
    """

    config: EncoderConfig
    tensors: dict[str, np.ndarray]

    def names(self) -> list[str]:
        return list(self.tensors)

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def check_finite(self) -> None:
        for name, tensor in self.tensors.items():
            if not np.all(np.isfinite(tensor)):
                raise ValueError(f"non-finite values in tensor {name!r}")

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})


def init_params(config: EncoderConfig) -> ModelParams:
    """Seeded random initialization; the tensor insertion order is canonical."""
    rng = np.random.default_rng(config.seed)
    h, f = config.hidden, config.ffn_dim

    def w(*shape: int) -> np.ndarray:
        return rng.normal(0.0, _INIT_STD, size=shape)

    tensors: dict[str, np.ndarray] = {
        "token_embedding": w(config.vocab_hash_size, h),
        "position_embedding": w(config.max_window_len, h),
    }
    for i in range(config.layers):
        p = f"layer{i}."
        tensors[p + "attn.wq"] = w(h, h)
        tensors[p + "attn.bq"] = np.zeros(h)
        tensors[p + "attn.wk"] = w(h, h)
        tensors[p + "attn.bk"] = np.zeros(h)
        tensors[p + "attn.wv"] = w(h, h)
        tensors[p + "attn.bv"] = np.zeros(h)
        tensors[p + "attn.wo"] = w(h, h)
        tensors[p + "attn.bo"] = np.zeros(h)
        tensors[p + "ln1.gain"] = np.ones(h)
        tensors[p + "ln1.bias"] = np.zeros(h)
        tensors[p + "ffn.w1"] = w(h, f)
        tensors[p + "ffn.b1"] = np.zeros(f)
        tensors[p + "ffn.w2"] = w(f, h)
        tensors[p + "ffn.b2"] = np.zeros(h)
        tensors[p + "ln2.gain"] = np.ones(h)
        tensors[p + "ln2.bias"] = np.zeros(h)
    tensors["start_head.w"] = w(h)
    tensors["start_head.b"] = np.zeros(())
    tensors["end_head.w"] = w(h)
    tensors["end_head.b"] = np.zeros(())
    tensors["yn_head.w"] = w(3, h)
    tensors["yn_head.b"] = np.zeros(3)
    return ModelParams(config=config, tensors=tensors)


def zeros_like_params(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Versioned binary checkpoint; values round-trip bit-exactly."""
    out: list[bytes] = [_CKPT_MAGIC, struct.pack("<H", _CKPT_VERSION)]
    config_blob = json.dumps(asdict(params.config), sort_keys=True).encode("utf-8")
    out.append(struct.pack("<I", len(config_blob)))
    out.append(config_blob)
    out.append(struct.pack("<I", len(params.tensors)))
    for name, tensor in params.tensors.items():
        name_blob = name.encode("utf-8")
        out.append(struct.pack("<H", len(name_blob)))
        out.append(name_blob)
        # ascontiguousarray would promote 0-d tensors to 1-d; tobytes is C-order anyway.
        arr = np.asarray(tensor, dtype=np.float64)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path: str | Path) -> ModelParams:
    data = Path(path).read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise ValueError("truncated checkpoint file")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(len(_CKPT_MAGIC)) != _CKPT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    (version,) = struct.unpack("<H", take(2))
    if version != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (config_len,) = struct.unpack("<I", take(4))
    config = EncoderConfig(**json.loads(take(config_len).decode("utf-8")))
    (num_tensors,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(num_tensors):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).copy()
        tensors[name] = arr
    return ModelParams(config=config, tensors=tensors)
