"""Spatial and temporal self-attention over skeleton sequences.

Spatial self-attention (SSA) relates all joints within one frame; temporal
self-attention (TSA) relates all time steps of one joint. Both share the
query/key/value construction: per head, q = n W_q, k = n W_k, v = n W_v,
scores = softmax(q k^T / sqrt(d_k_head)), output = concat(heads) W_o.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import AutodiffError, Tensor
from .modules import Module, init_linear


@dataclass
class AttentionParams:
    """Learnable maps and dimensions of a self-attention module.

    d_q == d_k and d_v are the *total* widths across heads; each head uses
    d_q // heads etc. Weight shapes: W_q,(C_in, d_q); W_k,(C_in, d_k);
    W_v,(C_in, d_v); W_o,(d_v, C_out).
    """

    W_q: Tensor
    W_k: Tensor
    W_v: Tensor
    W_o: Tensor
    heads: int
    d_q: int
    d_k: int
    d_v: int
    drop_rate: float = 0.0

    def __post_init__(self):
        if self.d_q != self.d_k:
            raise AutodiffError("attention requires d_q == d_k")
        if self.heads < 1:
            raise AutodiffError("attention requires at least one head")
        if self.d_q % self.heads or self.d_v % self.heads:
            raise AutodiffError(
                f"widths d_q={self.d_q}, d_v={self.d_v} must divide by heads={self.heads}")
        if not 0.0 <= self.drop_rate < 1.0:
            raise AutodiffError(f"drop_rate must be in [0, 1), got {self.drop_rate}")

    @property
    def c_in(self) -> int:
        return self.W_q.shape[0]

    @property
    def c_out(self) -> int:
        return self.W_o.shape[1]


def make_attention_params(rng: np.random.Generator, c_in: int, c_out: int,
                          heads: int, drop_rate: float = 0.0,
                          dtype=np.float64) -> AttentionParams:
    """Widths per the qk = C_out/4, v = C_out setting, split across heads."""
    d_qk = max(c_out // 4, heads)
    d_v = c_out
    if d_qk % heads or d_v % heads:
        raise AutodiffError(
            f"c_out={c_out} incompatible with heads={heads}: "
            f"d_qk={d_qk} and d_v={d_v} must divide by the head count")
    return AttentionParams(
        W_q=init_linear(rng, c_in, d_qk, dtype),
        W_k=init_linear(rng, c_in, d_qk, dtype),
        W_v=init_linear(rng, c_in, d_v, dtype),
        W_o=init_linear(rng, d_v, c_out, dtype),
        heads=heads, d_q=d_qk, d_k=d_qk, d_v=d_v, drop_rate=drop_rate,
    )


def drop_attention(scores: Tensor, drop_rate: float, training: bool,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Dropout on softmaxed attention rows with renormalization.

    Each entry is zeroed independently with probability `drop_rate`, then
    each row (last axis) is rescaled to sum to 1. Rows losing every entry
    fall back to their undropped values. Identity in eval mode.
    """
    if not 0.0 <= drop_rate < 1.0:
        raise AutodiffError(f"drop_rate must be in [0, 1), got {drop_rate}")
    if not training or drop_rate == 0.0:
        return scores
    if rng is None:
        rng = np.random.default_rng()
    keep = (rng.random(scores.shape) >= drop_rate).astype(scores.data.dtype)
    masked = ad.mul(scores, keep)
    row_sum = ad.sum_(masked, axis=-1, keepdims=True)
    alive = (row_sum.data > 0).astype(scores.data.dtype)
    safe = ad.add(row_sum, 1.0 - alive)  # avoid 0/0 on dead rows
    renorm = ad.div(masked, safe)
    return ad.add(ad.mul(renorm, alive), ad.mul(scores, 1.0 - alive))


def _attend(tokens: Tensor, p: AttentionParams, training: bool,
            rng: np.random.Generator | None, return_scores: bool):
    """Shared attention core over tokens shaped (N, G, L, C_in).

    G indexes independent groups (frames for SSA, joints for TSA) and L is
    the sequence attended over (joints for SSA, frames for TSA).
    """
    n, g, l, _ = tokens.shape
    h = p.heads
    dq, dv = p.d_q // h, p.d_v // h

    def split_heads(x, d):
        # (N, G, L, H*d) -> (N, H, G, L, d)
        return ad.transpose(ad.reshape(x, (n, g, l, h, d)), (0, 3, 1, 2, 4))

    q = split_heads(ad.linear_map(tokens, p.W_q), dq)
    k = split_heads(ad.linear_map(tokens, p.W_k), dq)
    v = split_heads(ad.linear_map(tokens, p.W_v), dv)
    raw = ad.matmul(q, ad.transpose(k, (0, 1, 2, 4, 3)))
    scores = ad.softmax(ad.mul(raw, 1.0 / np.sqrt(dq)), axis=-1)
    scores = drop_attention(scores, p.drop_rate, training, rng)
    z = ad.matmul(scores, v)  # (N, H, G, L, dv)
    z = ad.reshape(ad.transpose(z, (0, 2, 3, 1, 4)), (n, g, l, h * dv))
    out = ad.linear_map(z, p.W_o)
    if return_scores:
        return out, scores
    return out


def ssa_forward(x: Tensor, params: AttentionParams, training: bool = False,
                rng: np.random.Generator | None = None, return_scores: bool = False):
    """Spatial self-attention: x (N, C_in, T, V) -> (N, C_out, T, V).

    Frames are independent; within each frame every joint attends to every
    joint. Scores have shape (N, H, T, V, V).
    """
    if x.ndim != 4:
        raise AutodiffError(f"ssa_forward expects (N, C, T, V), got {x.shape}")
    if x.shape[3] < 1:
        raise AutodiffError("ssa_forward requires at least one joint")
    if x.shape[1] != params.c_in:
        raise AutodiffError(f"channel mismatch: x has {x.shape[1]}, params expect {params.c_in}")
    tokens = ad.transpose(x, (0, 2, 3, 1))  # (N, T, V, C)
    res = _attend(tokens, params, training, rng, return_scores)
    if return_scores:
        out, scores = res
        return ad.transpose(out, (0, 3, 1, 2)), scores
    return ad.transpose(res, (0, 3, 1, 2))


def tsa_forward(x: Tensor, params: AttentionParams, training: bool = False,
                rng: np.random.Generator | None = None, return_scores: bool = False):
    """Temporal self-attention: x (N, C_in, T, V) -> (N, C_out, T, V).

    Joints are independent; each joint attends over its own time axis.
    Scores have shape (N, H, V, T, T).
    """
    if x.ndim != 4:
        raise AutodiffError(f"tsa_forward expects (N, C, T, V), got {x.shape}")
    if x.shape[2] < 1:
        raise AutodiffError("tsa_forward requires at least one frame")
    if x.shape[1] != params.c_in:
        raise AutodiffError(f"channel mismatch: x has {x.shape[1]}, params expect {params.c_in}")
    tokens = ad.transpose(x, (0, 3, 2, 1))  # (N, V, T, C)
    res = _attend(tokens, params, training, rng, return_scores)
    if return_scores:
        out, scores = res
        return ad.transpose(out, (0, 3, 2, 1)), scores
    return ad.transpose(res, (0, 3, 2, 1))


def multi_head_combine(z_heads: list[Tensor], W_o: Tensor) -> Tensor:
    """Concatenate per-head outputs (N, d_v, ., .) on channels, then apply W_o."""
    shapes = {z.shape for z in z_heads}
    if len(shapes) != 1:
        raise AutodiffError(f"head outputs differ in shape: {sorted(shapes)}")
    z = ad.concat(z_heads, axis=1)
    zt = ad.transpose(z, (0, 2, 3, 1))
    return ad.transpose(ad.linear_map(zt, W_o), (0, 3, 1, 2))


class SpatialSelfAttention(Module):
    def __init__(self, c_in: int, c_out: int, heads: int, drop_rate: float = 0.0,
                 rng: np.random.Generator | None = None, dtype=np.float64):
        super().__init__()
        rng = rng or np.random.default_rng()
        p = make_attention_params(rng, c_in, c_out, heads, drop_rate, dtype)
        self.W_q, self.W_k, self.W_v, self.W_o = p.W_q, p.W_k, p.W_v, p.W_o
        self.params = p
        self.rng = rng

    def forward(self, x):
        return ssa_forward(x, self.params, self.training, self.rng)


class TemporalSelfAttention(SpatialSelfAttention):
    def forward(self, x):
        return tsa_forward(x, self.params, self.training, self.rng)
