"""Spatial-temporal transformer engine for skeleton-based action recognition."""

from .autodiff import Tensor, finite_diff_check
from .graph import SkeletonGraph, normalize_adjacency, ntu_graph
from .network import NetworkConfig, StreamNetwork, count_params, make_config
from .training import TrainConfig, cross_entropy, evaluate, lr_at_epoch, train

__version__ = "0.1.0"

__all__ = [
    "Tensor", "finite_diff_check", "SkeletonGraph", "normalize_adjacency",
    "ntu_graph", "NetworkConfig", "StreamNetwork", "count_params", "make_config",
    "TrainConfig", "cross_entropy", "evaluate", "lr_at_epoch", "train",
    "__version__",
]
