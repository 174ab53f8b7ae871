"""End-to-end runs over packed clip files: train, eval, fuse, gradcheck.

This is the layer the HTTP service and CLI both call into; every function
takes and returns plain data so the surfaces stay thin.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attention import make_attention_params, ssa_forward, tsa_forward
from .autodiff import Tensor, finite_diff_check
from .convs import GraphConv, TemporalConv
from .formats import (FormatError, fuse_scores, read_checkpoint, read_clips,
                      read_scores, write_checkpoint, write_clips, write_scores)
from .graph import SkeletonGraph, normalize_adjacency, ntu_graph
from .modules import BatchNorm
from .network import (LayerSpec, NetworkConfig, StreamNetwork, count_params,
                      make_config, unit_param_counts)
from .ntu import add_bone_channels, parse_ntu_skeleton, preprocess_clip
from .synth import synth_generate
from .training import TrainConfig, cross_entropy, desk_train_config, evaluate, train


def graph_for_joints(v: int) -> SkeletonGraph:
    """NTU graph for 25 joints, else a centered chain."""
    if v == 25:
        return ntu_graph()
    return normalize_adjacency([(i, i + 1) for i in range(v - 1)], v, v // 2)


def run_synth(out_path: str, seed: int, num_classes: int, clips_per_class: int,
              frames: int, joints: int, noise: float) -> dict:
    manifest, clips = synth_generate(seed, num_classes, clips_per_class,
                                     frames, joints, noise)
    write_clips(out_path, clips, manifest.labels())
    return {"path": str(out_path), "clips": len(manifest.samples),
            "num_classes": num_classes, "frames": frames, "joints": joints}


_ACTION_RE = re.compile(r"A(\d+)")


def run_parse_ntu(input_dir: str, out_path: str, target_frames: int = 300,
                  max_bodies: int = 2) -> dict:
    """Parse every `.skeleton` file in a directory into one packed clip file.

    Labels come from the NTU action code in the filename (`A###`, 1-based);
    files without one get label 0.
    """
    graph = ntu_graph()
    files = sorted(Path(input_dir).glob("*.skeleton"))
    if not files:
        raise FileNotFoundError(f"no .skeleton files in {input_dir}")
    data, labels = [], []
    for path in files:
        with open(path) as fh:
            frames = parse_ntu_skeleton(fh)
        match = _ACTION_RE.search(path.stem)
        label = int(match.group(1)) - 1 if match else 0
        clip = preprocess_clip(frames, target_frames, graph, max_bodies, label)
        data.append(clip.data)
        labels.append(label)
    write_clips(out_path, np.stack(data), labels)
    return {"path": str(out_path), "clips": len(files),
            "files": [p.name for p in files]}


def _load_dataset(data_path: str, bones: bool):
    data, labels = read_clips(data_path)
    v = data.shape[3]
    graph = graph_for_joints(v)
    if bones:
        if data.shape[1] == 3:
            data = add_bone_channels(data, graph)
        elif data.shape[1] != 6:
            raise FormatError(f"bones need 3- or 6-channel clips, got {data.shape[1]}")
    elif data.shape[1] != 3:
        raise FormatError(f"joints-only run needs 3-channel clips, got {data.shape[1]}")
    return data.astype(np.float32), labels, graph


def run_train(data_path: str, stream: str, run_dir: str, bones: bool = False,
              plan: str = "desk", heads: int | None = None,
              train_config: TrainConfig | None = None,
              deterministic: bool = False, test_fraction: float = 0.2,
              drop_rate: float = 0.1, stop_when=None) -> dict:
    data, labels, graph = _load_dataset(data_path, bones)
    num_classes = int(labels.max()) + 1
    cfg = make_config(stream, num_classes, bones=bones, desk=(plan == "desk"),
                      heads=heads, drop_rate=drop_rate)
    tc = train_config or desk_train_config(drop_rate=drop_rate)
    model = StreamNetwork(cfg, graph, seed=tc.seed, dtype=np.float32)

    train_idx, test_idx = split_indices_by_labels(labels, test_fraction, tc.seed)
    test_ids = [f"sample-{i:05d}" for i in test_idx]
    run_path = Path(run_dir)
    run_path.mkdir(parents=True, exist_ok=True)
    resolved = {
        "data_path": str(data_path), "stream": stream, "bones": bones,
        "plan": plan, "deterministic": deterministic,
        "test_fraction": test_fraction, "network": cfg.to_dict(),
        "train": asdict(tc),
    }
    resolved["train"]["lr_drop_epochs"] = list(tc.lr_drop_epochs)
    with open(run_path / "resolved_config.json", "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)

    history, table = train(model, data[train_idx], labels[train_idx],
                           data[test_idx], labels[test_idx], tc,
                           run_dir=run_path, deterministic=deterministic,
                           test_ids=test_ids, stop_when=stop_when)
    write_scores(run_path / "eval.scores", table)
    write_checkpoint(run_path / "model.ckpt",
                     {"network": cfg.to_dict(), "format": "sttr-checkpoint"},
                     model.state_dict())
    train_acc = max(m.accuracy for m in history if m.split == "train")
    return {
        "run_dir": str(run_path),
        "checkpoint": str(run_path / "model.ckpt"),
        "scores": str(run_path / "eval.scores"),
        "epochs": history[-1].epoch + 1,
        "final_train_accuracy": history[-2].accuracy,
        "best_train_accuracy": train_acc,
        "eval_accuracy": table.accuracy(),
    }


def split_indices_by_labels(labels: np.ndarray, test_fraction: float,
                            seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = rng.permutation(np.nonzero(labels == cls)[0])
        n_test = max(1, int(round(len(idx) * test_fraction)))
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.array(sorted(train)), np.array(sorted(test))


def load_model(checkpoint_path: str, graph: SkeletonGraph | None = None) -> StreamNetwork:
    config, blobs = read_checkpoint(checkpoint_path)
    net_cfg = NetworkConfig.from_dict(config["network"])
    model = StreamNetwork(net_cfg, graph, seed=0, dtype=np.float32)
    model.load_state_dict(blobs)
    return model


def run_eval(checkpoint: str, data_path: str, scores_out: str,
             batch_size: int = 32) -> dict:
    data, labels = read_clips(data_path)
    graph = graph_for_joints(data.shape[3])
    model = load_model(checkpoint, graph)
    if data.shape[1] != model.config.input_channels:
        if model.config.input_channels == 6 and data.shape[1] == 3:
            data = add_bone_channels(data, graph)
        else:
            raise FormatError(
                f"clips have {data.shape[1]} channels, model expects "
                f"{model.config.input_channels}")
    ids = [f"sample-{i:05d}" for i in range(len(data))]
    loss, table = evaluate(model, data.astype(np.float32), labels, ids, batch_size)
    write_scores(scores_out, table)
    return {"scores": str(scores_out), "accuracy": table.accuracy(),
            "loss": loss, "samples": len(data)}


def run_fuse(a_path: str, b_path: str, out_path: str) -> dict:
    fused = fuse_scores(read_scores(a_path), read_scores(b_path))
    write_scores(out_path, fused)
    return {"fused": str(out_path), "accuracy": fused.accuracy(),
            "samples": len(fused.sample_ids)}


def run_params(channels: int = 256, joints: int = 25, partitions: int = 3,
               kernel_t: int = 9, heads: int = 8, stream: str | None = None,
               plan: str = "full", bones: bool = False,
               num_classes: int = 60) -> dict:
    out = {"channels": channels,
           "units": unit_param_counts(channels, channels, joints, partitions,
                                      kernel_t, heads)}
    if stream is not None:
        cfg = make_config(stream, num_classes, bones=bones, desk=(plan == "desk"))
        out["network"] = count_params(cfg)
    return out


# ---------------------------------------------------------------------------
# gradient checking suite


def _tiny_stream_cases(seed: int):
    rng = np.random.default_rng(seed)
    graph = normalize_adjacency([(0, 1), (1, 2), (2, 3), (2, 4)], 5, 2)
    x = rng.normal(size=(2, 3, 6, 5))
    for stream in ("s-tr", "t-tr"):
        layers = [
            LayerSpec(3, 4, "gcn", "tcn", 1),
            LayerSpec(4, 4, "gcn", "tcn", 1),
            LayerSpec(4, 8, "ssa" if stream == "s-tr" else "gcn",
                      "tcn" if stream == "s-tr" else "tsa", 2),
            LayerSpec(8, 8, "ssa" if stream == "s-tr" else "gcn",
                      "tcn" if stream == "s-tr" else "tsa", 1),
        ]
        cfg = NetworkConfig(stream=stream, layers=layers, num_classes=3,
                            input_channels=3, heads=2, kernel_t=3)
        model = StreamNetwork(cfg, graph, seed=seed)
        model.train()
        labels = rng.integers(0, 3, size=2)
        clip = Tensor(np.repeat(x[:, :, :, :, None], 1, axis=4))

        def loss_fn(t, m=model, lab=labels):
            return cross_entropy(m.forward(t), lab)

        def loss_at_clip(t, m=model, lab=labels, c=clip):
            return cross_entropy(m.forward(c), lab)

        yield f"{stream}-input", loss_fn, clip
        layer3 = model.layers[2]
        spatial_w = (layer3.spatial.W_q if stream == "s-tr"
                     else layer3.spatial.weights[0])
        yield f"{stream}-spatial-weight", loss_at_clip, spatial_w
        temporal_w = (layer3.temporal.kernel if stream == "s-tr"
                      else layer3.temporal.W_v)
        yield f"{stream}-temporal-weight", loss_at_clip, temporal_w
        yield f"{stream}-classifier", loss_at_clip, model.fc_w


def run_gradcheck(seeds: int = 10, tolerance: float = 1e-5,
                  include_streams: bool = True) -> dict:
    """Finite-difference sweep over every differentiable op and both streams."""
    cases = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.normal(size=(2, 3, 4, 5)))

        p = make_attention_params(rng, 3, 8, 2)
        cases.append(("ssa", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(ssa_forward(t, p), ssa_forward(t, p))), x)))
        cases.append(("tsa", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(tsa_forward(t, p), tsa_forward(t, p))), x)))

        graph = normalize_adjacency([(0, 1), (1, 2), (2, 3), (2, 4)], 5, 2)
        gc = GraphConv(3, 4, graph, rng)
        cases.append(("gcn", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(gc(t), gc(t))), x)))
        tc = TemporalConv(3, 4, 3, stride=2, rng=rng)
        cases.append(("tcn", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(tc(t), tc(t))), x)))
        bn = BatchNorm(3)
        cases.append(("batch_norm", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(bn(t), bn(t))), x)))
        cases.append(("softmax", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(ad.softmax(t, axis=1), ad.exp(t))), x)))
        w = Tensor(rng.normal(size=(5, 3)))
        cases.append(("linear_map", seed, finite_diff_check(
            lambda t: ad.sum_(ad.mul(ad.matmul(t, w), ad.matmul(t, w))), x)))
        logits = Tensor(rng.normal(size=(4, 3)))
        labels = rng.integers(0, 3, size=4)
        cases.append(("cross_entropy", seed, finite_diff_check(
            lambda t: cross_entropy(t, labels), logits)))

        if include_streams:
            for name, loss_fn, clip in _tiny_stream_cases(seed):
                cases.append((name, seed, finite_diff_check(loss_fn, clip)))

    results = [{"op": name, "seed": seed, "max_rel_error": err,
                "passed": bool(err < tolerance)}
               for name, seed, err in cases]
    return {
        "tolerance": tolerance,
        "cases": results,
        "max_rel_error": max(r["max_rel_error"] for r in results),
        "passed": all(r["passed"] for r in results),
    }
