"""Graph convolution (GCN) and temporal convolution (TCN) units."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import AutodiffError, Tensor
from .graph import SkeletonGraph
from .modules import BatchNorm, Module


def gcn_forward(x: Tensor, a_norm: np.ndarray, weights: list[Tensor],
                edge_importance: list[Tensor], bias: Tensor | None = None) -> Tensor:
    """Partitioned graph convolution over the joint axis of x (N, C_in, T, V).

    y = sum_p (A_norm[p] * M_p) (x W_p) + b, frames independent.
    """
    if x.ndim != 4:
        raise AutodiffError(f"gcn_forward expects (N, C, T, V), got {x.shape}")
    p_count = a_norm.shape[0]
    if len(weights) != p_count or len(edge_importance) != p_count:
        raise AutodiffError(
            f"partition mismatch: adjacency has {p_count}, "
            f"got {len(weights)} weights / {len(edge_importance)} masks")
    if a_norm.shape[1] != x.shape[3]:
        raise AutodiffError(f"joint mismatch: x has {x.shape[3]}, graph has {a_norm.shape[1]}")
    tokens = ad.transpose(x, (0, 2, 3, 1))  # (N, T, V, C)
    out = None
    for p in range(p_count):
        xw = ad.matmul(tokens, weights[p])  # (N, T, V, D)
        a_eff = ad.mul(edge_importance[p], a_norm[p])  # (V, V)
        term = ad.matmul(a_eff, xw)
        out = term if out is None else ad.add(out, term)
    if bias is not None:
        out = ad.add(out, bias)
    return ad.transpose(out, (0, 3, 1, 2))


def tcn_forward(x: Tensor, kernel: Tensor, bias: Tensor | None = None,
                stride: int = 1) -> Tensor:
    """1 x K_t convolution along time with zero same-padding; joints independent.

    kernel: (C_out, C_in, K_t), K_t odd; stride in {1, 2}.
    """
    return ad.temporal_conv(x, kernel, bias, stride)


class GraphConv(Module):
    """GCN unit: partitioned graph conv + edge-importance masks + bias + BN."""

    def __init__(self, c_in: int, c_out: int, graph: SkeletonGraph,
                 rng: np.random.Generator | None = None, dtype=np.float64,
                 with_bn: bool = True):
        super().__init__()
        rng = rng or np.random.default_rng()
        self.graph = graph
        p = graph.A_norm.shape[0]
        v = graph.num_joints
        bound = 1.0 / np.sqrt(c_in * p)
        self.weights = [
            Tensor(rng.uniform(-bound, bound, size=(c_in, c_out)).astype(dtype),
                   requires_grad=True)
            for _ in range(p)
        ]
        self.edge_importance = [
            Tensor(np.ones((v, v), dtype=dtype), requires_grad=True) for _ in range(p)
        ]
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.bn = BatchNorm(c_out, dtype=dtype) if with_bn else None

    def forward(self, x):
        y = gcn_forward(x, self.graph.A_norm, self.weights, self.edge_importance, self.bias)
        if self.bn is not None:
            y = self.bn(y)
        return y


class TemporalConv(Module):
    """TCN unit: 1 x K_t temporal convolution + bias + BN."""

    def __init__(self, c_in: int, c_out: int, kernel_t: int = 9, stride: int = 1,
                 rng: np.random.Generator | None = None, dtype=np.float64,
                 with_bn: bool = True):
        super().__init__()
        if kernel_t % 2 != 1:
            raise AutodiffError(f"kernel_t must be odd, got {kernel_t}")
        if stride not in (1, 2):
            raise AutodiffError(f"stride must be 1 or 2, got {stride}")
        rng = rng or np.random.default_rng()
        bound = 1.0 / np.sqrt(c_in * kernel_t)
        self.kernel = Tensor(
            rng.uniform(-bound, bound, size=(c_out, c_in, kernel_t)).astype(dtype),
            requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.bn = BatchNorm(c_out, dtype=dtype) if with_bn else None

    def forward(self, x):
        y = tcn_forward(x, self.kernel, self.bias, self.stride)
        if self.bn is not None:
            y = self.bn(y)
        return y
