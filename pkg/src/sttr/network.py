"""Stream assembly: S-TR / T-TR layers, full networks, parameter accounting.

Each layer pre-normalizes its input (BatchNorm), applies a spatial unit
(GCN or SSA), a ReLU, then a temporal unit (TCN or TSA), and adds a skip
branch (identity, or a strided 1x1 map when shape changes):

    S-TR layer: y = TCN(relu(SSA(BN(x)))) + skip(x)
    T-TR layer: y = TSA(relu(GCN(BN(x)))) + skip(x)

For a stride-2 T-TR layer the time axis is subsampled before TSA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import AutodiffError, Tensor
from .attention import SpatialSelfAttention, TemporalSelfAttention
from .convs import GraphConv, TemporalConv
from .graph import SkeletonGraph, ntu_graph
from .modules import BatchNorm, Module, init_linear


@dataclass
class LayerSpec:
    c_in: int
    c_out: int
    spatial_kind: str  # "gcn" | "ssa"
    temporal_kind: str  # "tcn" | "tsa"
    temporal_stride: int = 1

    def __post_init__(self):
        if self.spatial_kind not in ("gcn", "ssa"):
            raise ValueError(f"unknown spatial kind {self.spatial_kind!r}")
        if self.temporal_kind not in ("tcn", "tsa"):
            raise ValueError(f"unknown temporal kind {self.temporal_kind!r}")
        if self.temporal_stride not in (1, 2):
            raise ValueError(f"temporal stride must be 1 or 2, got {self.temporal_stride}")


@dataclass
class NetworkConfig:
    stream: str  # "s-tr" | "t-tr"
    layers: list[LayerSpec]
    num_classes: int
    input_channels: int = 3
    use_bones: bool = False
    heads: int = 8
    kernel_t: int = 9
    drop_rate: float = 0.0

    def __post_init__(self):
        if self.stream not in ("s-tr", "t-tr"):
            raise ValueError(f"unknown stream {self.stream!r}")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    def to_dict(self) -> dict:
        return {
            "stream": self.stream,
            "layers": [vars(l) for l in self.layers],
            "num_classes": self.num_classes,
            "input_channels": self.input_channels,
            "use_bones": self.use_bones,
            "heads": self.heads,
            "kernel_t": self.kernel_t,
            "drop_rate": self.drop_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["layers"] = [LayerSpec(**l) for l in d["layers"]]
        return cls(**d)


# 9-layer joints-only plan; first three layers are plain GCN+TCN, stride 2
# enters the 128- and 256-channel blocks.
FULL_CHANNELS = (64, 64, 64, 64, 128, 128, 128, 256, 256)
FULL_STRIDES = (1, 1, 1, 1, 2, 1, 1, 2, 1)
# compact plan for the synthetic desk-scale task
DESK_CHANNELS = (16, 16, 16, 32)
DESK_STRIDES = (1, 1, 1, 2)
PLAIN_LAYERS = 3


def build_layer_plan(stream: str, channels=FULL_CHANNELS, strides=FULL_STRIDES,
                     input_channels: int = 3, bones: bool = False) -> list[LayerSpec]:
    """Layer plan: layers 1..3 are GCN+TCN; later layers swap in SSA or TSA."""
    mult = 2 if bones else 1
    specs = []
    c_prev = input_channels * mult
    for i, (c, s) in enumerate(zip(channels, strides)):
        c_out = c * mult
        if i < PLAIN_LAYERS:
            spatial, temporal = "gcn", "tcn"
        elif stream == "s-tr":
            spatial, temporal = "ssa", "tcn"
        else:
            spatial, temporal = "gcn", "tsa"
        specs.append(LayerSpec(c_prev, c_out, spatial, temporal, s))
        c_prev = c_out
    return specs


def make_config(stream: str, num_classes: int, bones: bool = False,
                desk: bool = False, heads: int | None = None,
                drop_rate: float = 0.0, kernel_t: int = 9) -> NetworkConfig:
    channels, strides = (DESK_CHANNELS, DESK_STRIDES) if desk else (FULL_CHANNELS, FULL_STRIDES)
    if heads is None:
        heads = 2 if desk else 8
    return NetworkConfig(
        stream=stream,
        layers=build_layer_plan(stream, channels, strides, 3, bones),
        num_classes=num_classes,
        input_channels=6 if bones else 3,
        use_bones=bones,
        heads=heads,
        kernel_t=kernel_t,
        drop_rate=drop_rate,
    )


class STLayer(Module):
    def __init__(self, spec: LayerSpec, graph: SkeletonGraph, heads: int,
                 kernel_t: int, drop_rate: float, rng: np.random.Generator,
                 dtype=np.float64):
        super().__init__()
        self.spec = spec
        self.bn_in = BatchNorm(spec.c_in, dtype=dtype)
        if spec.spatial_kind == "gcn":
            self.spatial = GraphConv(spec.c_in, spec.c_out, graph, rng, dtype)
        else:
            self.spatial = SpatialSelfAttention(spec.c_in, spec.c_out, heads,
                                                drop_rate, rng, dtype)
        if spec.temporal_kind == "tcn":
            self.temporal = TemporalConv(spec.c_out, spec.c_out, kernel_t,
                                         spec.temporal_stride, rng, dtype)
        else:
            self.temporal = TemporalSelfAttention(spec.c_out, spec.c_out, heads,
                                                  drop_rate, rng, dtype)
        if spec.c_in != spec.c_out or spec.temporal_stride != 1:
            self.skip = TemporalConv(spec.c_in, spec.c_out, 1,
                                     spec.temporal_stride, rng, dtype, with_bn=False)
        else:
            self.skip = None

    def forward(self, x):
        h = self.bn_in(x)
        h = self.spatial(h)
        h = ad.relu(h)
        if self.spec.temporal_kind == "tsa" and self.spec.temporal_stride == 2:
            h = ad.slice_axis(h, axis=2, step=2)
        h = self.temporal(h)
        skip = x if self.skip is None else self.skip(x)
        return ad.add(h, skip)


class StreamNetwork(Module):
    """One stream of the two-stream network: layers, pooling, classifier."""

    def __init__(self, config: NetworkConfig, graph: SkeletonGraph | None = None,
                 seed: int = 0, dtype=np.float64):
        super().__init__()
        self.config = config
        self.graph = graph or ntu_graph()
        rng = np.random.default_rng(seed)
        if config.layers[0].c_in != config.input_channels:
            raise ValueError(
                f"plan starts at {config.layers[0].c_in} channels but input has "
                f"{config.input_channels}")
        self.layers = [
            STLayer(spec, self.graph, config.heads, config.kernel_t,
                    config.drop_rate, rng, dtype)
            for spec in config.layers
        ]
        c_final = config.layers[-1].c_out
        self.fc_w = init_linear(rng, c_final, config.num_classes, dtype)
        self.fc_b = Tensor(np.zeros(config.num_classes, dtype=dtype), requires_grad=True)

    def forward(self, clip) -> Tensor:
        """clip: (N, C, T, V, M) -> logits (N, num_classes)."""
        clip = ad.as_tensor(clip)
        if clip.ndim != 5:
            raise AutodiffError(f"expected (N, C, T, V, M), got {clip.shape}")
        n, c, t, v, m = clip.shape
        if m == 0:
            raise AutodiffError("clip has zero bodies")
        if c != self.config.input_channels:
            raise AutodiffError(
                f"clip has {c} channels, network expects {self.config.input_channels}")
        x = ad.reshape(ad.transpose(clip, (0, 4, 1, 2, 3)), (n * m, c, t, v))
        for layer in self.layers:
            x = layer(x)
        pooled = x.mean(axis=(2, 3))  # (N*M, C_final)
        logits = ad.linear_map(pooled, self.fc_w, self.fc_b)
        per_body = ad.reshape(logits, (n, m, self.config.num_classes))
        return per_body.mean(axis=1)


# ---------------------------------------------------------------------------
# parameter accounting


def unit_param_counts(c_in: int, c_out: int, num_joints: int = 25,
                      partitions: int = 3, kernel_t: int = 9,
                      heads: int = 8) -> dict[str, dict[str, int]]:
    """Itemized per-unit parameter counts at the given widths."""
    d_qk = max(c_out // 4, heads)
    d_v = c_out
    attn = {
        "W_q": c_in * d_qk,
        "W_k": c_in * d_qk,
        "W_v": c_in * d_v,
        "W_o": d_v * c_out,
    }
    attn["total"] = sum(attn.values())
    gcn = {
        "weights": partitions * c_in * c_out,
        "edge_importance": partitions * num_joints * num_joints,
        "bias": c_out,
        "batch_norm": 2 * c_out,
    }
    gcn["total"] = sum(gcn.values())
    tcn = {
        "weights": kernel_t * c_in * c_out,
        "bias": c_out,
        "batch_norm": 2 * c_out,
    }
    tcn["total"] = sum(tcn.values())
    return {"gcn": gcn, "ssa": dict(attn), "tcn": tcn, "tsa": dict(attn)}


def count_params(model_or_config) -> dict:
    """Exact per-submodule and total counts for a network."""
    if isinstance(model_or_config, NetworkConfig):
        model = StreamNetwork(model_or_config)
    else:
        model = model_or_config
    per_layer = []
    for i, layer in enumerate(model.layers):
        entry = {
            "layer": i + 1,
            "spec": vars(layer.spec),
            "bn_in": layer.bn_in.num_params(),
            "spatial": layer.spatial.num_params(),
            "temporal": layer.temporal.num_params(),
            "skip": 0 if layer.skip is None else layer.skip.num_params(),
        }
        entry["total"] = entry["bn_in"] + entry["spatial"] + entry["temporal"] + entry["skip"]
        per_layer.append(entry)
    classifier = model.fc_w.size + model.fc_b.size
    return {
        "stream": model.config.stream,
        "per_layer": per_layer,
        "classifier": classifier,
        "total": model.num_params(),
    }
