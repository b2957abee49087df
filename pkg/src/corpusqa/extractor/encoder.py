"""Encoder forward and backward passes, written directly against numpy.

Every intermediate needed by the backward pass is kept in a cache object, so
training and the finite-difference gradient check exercise the exact same
forward code. All operations are plain numpy ufuncs, so the same code runs
unchanged at extended precision when the gradient checker needs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..corpus import Window
from .params import ModelParams, token_id

LN_EPS = 1e-5

# tanh-form gelu constants
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x ** 3)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(_GELU_C * (x + _GELU_A * x ** 3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (
        1.0 + 3.0 * _GELU_A * x * x
    )


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Per-position normalization over the hidden axis. Returns (y, xhat, inv)."""
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return gain * xhat + bias, xhat, inv


def layer_norm_backward(
    dy: np.ndarray, xhat: np.ndarray, inv: np.ndarray, gain: np.ndarray
):
    """Returns (dx, dgain, dbias) for layer_norm."""
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dp: np.ndarray, p: np.ndarray) -> np.ndarray:
    return p * (dp - (dp * p).sum(axis=-1, keepdims=True))


@dataclass
class _LayerCache:
    x_in: np.ndarray          # (n, H) input to the block
    q: np.ndarray             # (A, n, d)
    k: np.ndarray
    v: np.ndarray
    attn_probs: np.ndarray    # (A, n, n)
    ctx: np.ndarray           # (n, H) merged heads, pre-wo
    ln1_xhat: np.ndarray
    ln1_inv: np.ndarray
    ln1_out: np.ndarray
    ffn_pre: np.ndarray       # (n, 4H) pre-activation
    ffn_act: np.ndarray       # (n, 4H)
    ln2_xhat: np.ndarray
    ln2_inv: np.ndarray


@dataclass
class ForwardCache:
    token_ids: np.ndarray
    layers: list[_LayerCache] = field(default_factory=list)
    states: np.ndarray | None = None
    pooled: np.ndarray | None = None


@dataclass(frozen=True)
class EncodeResult:
    states: np.ndarray   # (n, H) per-token final states
    pooled: np.ndarray   # (H,) mean of final states


def window_token_ids(params: ModelParams, window: Window) -> np.ndarray:
    config = params.config
    if len(window) > config.max_window_len:
        raise ValueError(
            f"window has {len(window)} tokens, model maximum is "
            f"{config.max_window_len}"
        )
    if len(window) == 0:
        raise ValueError("cannot encode an empty window")
    ids = [token_id(tok.surface, config.vocab_hash_size) for tok in window.tokens]
    return np.asarray(ids, dtype=np.int64)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, h = x.shape
    return x.reshape(n, heads, h // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    a, n, d = x.shape
    return x.transpose(1, 0, 2).reshape(n, a * d)


def forward(params: ModelParams, ids: np.ndarray) -> ForwardCache:
    config = params.config
    t = params.tensors
    n = ids.shape[0]
    scale = 1.0 / math.sqrt(config.head_dim)

    cache = ForwardCache(token_ids=ids)
    x = t["token_embedding"][ids] + t["position_embedding"][:n]

    for i in range(config.layers):
        p = f"layer{i}."
        q = _split_heads(x @ t[p + "attn.wq"] + t[p + "attn.bq"], config.heads)
        k = _split_heads(x @ t[p + "attn.wk"] + t[p + "attn.bk"], config.heads)
        v = _split_heads(x @ t[p + "attn.wv"] + t[p + "attn.bv"], config.heads)
        probs = softmax(q @ k.transpose(0, 2, 1) * scale)
        ctx = _merge_heads(probs @ v)
        attn_out = ctx @ t[p + "attn.wo"] + t[p + "attn.bo"]
        res1 = x + attn_out
        ln1_out, ln1_xhat, ln1_inv = layer_norm(
            res1, t[p + "ln1.gain"], t[p + "ln1.bias"]
        )
        ffn_pre = ln1_out @ t[p + "ffn.w1"] + t[p + "ffn.b1"]
        ffn_act = gelu(ffn_pre)
        ffn_out = ffn_act @ t[p + "ffn.w2"] + t[p + "ffn.b2"]
        res2 = ln1_out + ffn_out
        x_out, ln2_xhat, ln2_inv = layer_norm(
            res2, t[p + "ln2.gain"], t[p + "ln2.bias"]
        )
        cache.layers.append(
            _LayerCache(
                x_in=x,
                q=q, k=k, v=v,
                attn_probs=probs, ctx=ctx,
                ln1_xhat=ln1_xhat, ln1_inv=ln1_inv, ln1_out=ln1_out,
                ffn_pre=ffn_pre, ffn_act=ffn_act,
                ln2_xhat=ln2_xhat, ln2_inv=ln2_inv,
            )
        )
        x = x_out

    cache.states = x
    cache.pooled = x.mean(axis=0)
    return cache


def backward(
    params: ModelParams,
    cache: ForwardCache,
    d_states: np.ndarray,
    d_pooled: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulates parameter gradients into grads (same keys as params.tensors)."""
    config = params.config
    t = params.tensors
    n = cache.token_ids.shape[0]
    scale = 1.0 / math.sqrt(config.head_dim)

    dx = d_states + d_pooled[None, :] / n

    for i in reversed(range(config.layers)):
        p = f"layer{i}."
        lc = cache.layers[i]
        # Output norm.
        d_res2, dgain, dbias = layer_norm_backward(
            dx, lc.ln2_xhat, lc.ln2_inv, t[p + "ln2.gain"]
        )
        grads[p + "ln2.gain"] += dgain
        grads[p + "ln2.bias"] += dbias
        # FFN with residual.
        d_ffn_out = d_res2
        grads[p + "ffn.w2"] += lc.ffn_act.T @ d_ffn_out
        grads[p + "ffn.b2"] += d_ffn_out.sum(axis=0)
        d_act = d_ffn_out @ t[p + "ffn.w2"].T
        d_pre = d_act * gelu_grad(lc.ffn_pre)
        grads[p + "ffn.w1"] += lc.ln1_out.T @ d_pre
        grads[p + "ffn.b1"] += d_pre.sum(axis=0)
        d_ln1_out = d_res2 + d_pre @ t[p + "ffn.w1"].T
        # Post-attention norm.
        d_res1, dgain, dbias = layer_norm_backward(
            d_ln1_out, lc.ln1_xhat, lc.ln1_inv, t[p + "ln1.gain"]
        )
        grads[p + "ln1.gain"] += dgain
        grads[p + "ln1.bias"] += dbias
        # Attention output projection, residual carries d_res1 to the input too.
        d_attn_out = d_res1
        grads[p + "attn.wo"] += lc.ctx.T @ d_attn_out
        grads[p + "attn.bo"] += d_attn_out.sum(axis=0)
        d_ctx = _split_heads(d_attn_out @ t[p + "attn.wo"].T, config.heads)
        d_probs = d_ctx @ lc.v.transpose(0, 2, 1)
        d_v = lc.attn_probs.transpose(0, 2, 1) @ d_ctx
        d_scores = softmax_backward(d_probs, lc.attn_probs) * scale
        d_q = d_scores @ lc.k
        d_k = d_scores.transpose(0, 2, 1) @ lc.q
        dq_flat = _merge_heads(d_q)
        dk_flat = _merge_heads(d_k)
        dv_flat = _merge_heads(d_v)
        x_in = lc.x_in
        grads[p + "attn.wq"] += x_in.T @ dq_flat
        grads[p + "attn.bq"] += dq_flat.sum(axis=0)
        grads[p + "attn.wk"] += x_in.T @ dk_flat
        grads[p + "attn.bk"] += dk_flat.sum(axis=0)
        grads[p + "attn.wv"] += x_in.T @ dv_flat
        grads[p + "attn.bv"] += dv_flat.sum(axis=0)
        dx = (
            d_res1
            + dq_flat @ t[p + "attn.wq"].T
            + dk_flat @ t[p + "attn.wk"].T
            + dv_flat @ t[p + "attn.wv"].T
        )

    np.add.at(grads["token_embedding"], cache.token_ids, dx)
    grads["position_embedding"][:n] += dx


def encode(params: ModelParams, window: Window) -> EncodeResult:
    ids = window_token_ids(params, window)
    cache = forward(params, ids)
    return EncodeResult(states=cache.states, pooled=cache.pooled)
