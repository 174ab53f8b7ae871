"""Acceptance suite: nine end-to-end correctness criteria.

Each criterion prints one PASS/FAIL line (run with `pytest -s` to see them
on success). Criteria 6 and 7 share four desk-scale training runs on the
seeded synthetic dataset, so the whole file stays within its time budget.
"""

import io
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from sttr import autodiff as ad
from sttr.attention import make_attention_params, ssa_forward, tsa_forward
from sttr.autodiff import Tensor
from sttr.convs import gcn_forward
from sttr.formats import ScoreTable, fuse_scores, read_scores, write_scores
from sttr.graph import normalize_adjacency, ntu_graph
from sttr.network import unit_param_counts
from sttr.ntu import SkeletonParseError, parse_ntu_skeleton, preprocess_clip
from sttr.pipeline import run_gradcheck, run_synth, run_train
from sttr.training import TrainConfig, lr_at_epoch


@contextmanager
def criterion(number, description):
    try:
        yield
    except BaseException:
        print(f"[criterion {number}] FAIL — {description}")
        raise
    print(f"[criterion {number}] PASS — {description}")


# ---------------------------------------------------------------- shared runs

@pytest.fixture(scope="module")
def synth_runs(tmp_path_factory):
    """Seeded 4-class dataset plus both streams trained with and without bones."""
    root = tmp_path_factory.mktemp("acceptance")
    data_path = root / "synth.clips"
    run_synth(str(data_path), seed=0, num_classes=4, clips_per_class=50,
              frames=32, joints=25, noise=0.02)
    done = lambda train_acc, eval_acc: train_acc >= 0.95 and eval_acc >= 0.80
    runs = {}
    for stream in ("s-tr", "t-tr"):
        for bones in (False, True):
            tag = f"{stream}{'-bones' if bones else ''}"
            start = time.monotonic()
            result = run_train(str(data_path), stream, str(root / tag),
                               bones=bones, deterministic=True,
                               stop_when=done)
            result["seconds"] = time.monotonic() - start
            runs[tag] = result
    return runs


# ----------------------------------------------------------------- criteria

def test_criterion_1_gradient_suite():
    with criterion(1, "gradient suite: all ops and both streams, "
                      "rel error < 1e-5 over 10 seeds in < 2 min"):
        start = time.monotonic()
        report = run_gradcheck(seeds=10, tolerance=1e-5, include_streams=True)
        elapsed = time.monotonic() - start
        failed = [c for c in report["cases"] if not c["passed"]]
        assert not failed, failed
        assert report["passed"]
        assert report["max_rel_error"] < 1e-5
        assert elapsed < 120.0, f"gradient suite took {elapsed:.1f}s"


def _naive_attention(tokens, p):
    """Per-token loop reference; tokens (N, G, L, C_in)."""
    n, g, l, _ = tokens.shape
    h = p.heads
    dq, dv = p.d_q // h, p.d_v // h
    wq, wk, wv, wo = (w.data for w in (p.W_q, p.W_k, p.W_v, p.W_o))
    out = np.zeros((n, g, l, p.c_out))
    for b in range(n):
        for gi in range(g):
            heads = []
            for head in range(h):
                q = tokens[b, gi] @ wq[:, head * dq:(head + 1) * dq]
                k = tokens[b, gi] @ wk[:, head * dq:(head + 1) * dq]
                v = tokens[b, gi] @ wv[:, head * dv:(head + 1) * dv]
                z = np.zeros((l, dv))
                for i in range(l):
                    alpha = np.array([q[i] @ k[j] for j in range(l)])
                    alpha = np.exp(alpha / np.sqrt(dq))
                    alpha /= alpha.sum()
                    for j in range(l):
                        z[i] += alpha[j] * v[j]
                heads.append(z)
            out[b, gi] = np.concatenate(heads, axis=1) @ wo
    return out


def test_criterion_2_attention_oracle():
    with criterion(2, "vectorized spatial/temporal attention matches naive "
                      "loops on 20 instances, max abs diff < 1e-6"):
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            heads = int(rng.choice([1, 2, 4]))
            c_in = int(rng.integers(1, 5))
            c_out = int(rng.choice([4, 8])) * heads
            t, v = int(rng.integers(1, 5)), int(rng.integers(2, 7))
            p = make_attention_params(rng, c_in, c_out, heads)
            x = rng.normal(size=(2, c_in, t, v))
            got_s = ssa_forward(Tensor(x), p).data
            want_s = _naive_attention(x.transpose(0, 2, 3, 1), p)
            worst = max(worst, np.abs(got_s - want_s.transpose(0, 3, 1, 2)).max())
            got_t = tsa_forward(Tensor(x), p).data
            want_t = _naive_attention(x.transpose(0, 3, 2, 1), p)
            worst = max(worst, np.abs(got_t - want_t.transpose(0, 3, 2, 1)).max())
        assert worst < 1e-6, f"max abs diff {worst:.3e}"


def test_criterion_3_equivariance():
    with criterion(3, "SSA joint-, TSA time-, and GCN graph-permutation "
                      "equivariance within 1e-6"):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            p = make_attention_params(rng, 3, 8, 2)
            x = rng.normal(size=(2, 3, 6, 7))
            jperm = rng.permutation(7)
            direct = ssa_forward(Tensor(x[:, :, :, jperm]), p).data
            permuted = ssa_forward(Tensor(x), p).data[:, :, :, jperm]
            assert np.abs(direct - permuted).max() < 1e-6
            tperm = rng.permutation(6)
            direct = tsa_forward(Tensor(x[:, :, tperm, :]), p).data
            permuted = tsa_forward(Tensor(x), p).data[:, :, tperm, :]
            assert np.abs(direct - permuted).max() < 1e-6

            graph = normalize_adjacency([(0, 1), (1, 2), (2, 3), (3, 4),
                                         (2, 5), (5, 6)], 7, 2)
            w = [Tensor(rng.normal(size=(3, 4))) for _ in range(3)]
            m = [Tensor(np.ones((7, 7))) for _ in range(3)]
            a_perm = graph.A_norm[:, jperm][:, :, jperm]
            direct = gcn_forward(Tensor(x[:, :, :, jperm]), a_perm, w, m).data
            permuted = gcn_forward(Tensor(x), graph.A_norm, w, m).data[:, :, :, jperm]
            assert np.abs(direct - permuted).max() < 1e-6


def test_criterion_4_parameter_accounting():
    with criterion(4, "parameter counts at C=256: TCN weights exactly 589824; "
                      "GCN within 2% of 199k; SSA/TSA within 15% of 178k/177k; "
                      "SSA < GCN and TSA < TCN"):
        units = unit_param_counts(256, 256, num_joints=25, partitions=3,
                                  kernel_t=9, heads=8)
        assert units["tcn"]["weights"] == 589824
        assert abs(units["gcn"]["total"] - 199_000) / 199_000 < 0.02
        assert abs(units["ssa"]["total"] - 178_000) / 178_000 < 0.15
        assert abs(units["tsa"]["total"] - 177_000) / 177_000 < 0.15
        assert units["ssa"]["total"] < units["gcn"]["total"]
        assert units["tsa"]["total"] < units["tcn"]["total"]


def test_criterion_5_lr_schedule():
    with criterion(5, "learning rate is exactly 0.1 / 0.01 / 0.001 at "
                      "epochs 0 / 60 / 90"):
        config = TrainConfig(epochs=120, base_lr=0.1, lr_drop_epochs=(60, 90),
                             lr_drop_factor=10.0)
        assert lr_at_epoch(0, config) == 0.1
        assert lr_at_epoch(60, config) == 0.01
        assert lr_at_epoch(90, config) == 0.001


def test_criterion_6_desk_scale_learning(synth_runs):
    with criterion(6, "each stream, joints and bones, reaches >= 95% train and "
                      ">= 80% held-out within 50 epochs, < 10 min per stream"):
        for tag, result in synth_runs.items():
            assert result["epochs"] <= 50, tag
            assert result["best_train_accuracy"] >= 0.95, \
                f"{tag}: train accuracy {result['best_train_accuracy']:.3f}"
            assert result["eval_accuracy"] >= 0.80, \
                f"{tag}: held-out accuracy {result['eval_accuracy']:.3f}"
            assert result["seconds"] < 600.0, \
                f"{tag}: took {result['seconds']:.0f}s"


def test_criterion_7_fusion(synth_runs, tmp_path):
    with criterion(7, "two-stream fusion beats or matches the weaker stream, "
                      "and matches a 3-sample hand oracle exactly"):
        a = read_scores(synth_runs["s-tr"]["scores"])
        b = read_scores(synth_runs["t-tr"]["scores"])
        fused = fuse_scores(a, b)
        assert fused.accuracy() >= min(a.accuracy(), b.accuracy())

        ids = ["clip-0", "clip-1", "clip-2"]
        labels = np.array([0, 1, 1])
        pa = np.array([[0.7, 0.3], [0.4, 0.6], [0.5, 0.5]])
        pb = np.array([[0.2, 0.8], [0.1, 0.9], [0.5, 0.5]])
        oracle = fuse_scores(ScoreTable(ids, labels, pa),
                             ScoreTable(ids, labels, pb))
        np.testing.assert_array_equal(oracle.probs, pa + pb)
        # clip-0 fuses to (0.9, 1.1) -> class 1; clip-2 ties -> lowest index
        np.testing.assert_array_equal(oracle.predictions(), [1, 1, 0])
        assert oracle.accuracy() == pytest.approx(1.0 / 3.0)
        # round-trips through the score-table file format unchanged
        path = tmp_path / "oracle.scores"
        write_scores(str(path), oracle)
        back = read_scores(str(path))
        np.testing.assert_allclose(back.probs, oracle.probs, rtol=1e-7)


def _ntu_text(frames):
    lines = [str(len(frames))]
    for bodies in frames:
        lines.append(str(len(bodies)))
        for joints in bodies:
            lines.append("0 0 0 0 0 0 0 0 0 2")
            lines.append("25")
            for x, y, z in joints:
                lines.append(f"{x} {y} {z} 0 0 0 0 0 0 0 0 2")
    return "\n".join(lines) + "\n"


def test_criterion_8_ntu_ingestion():
    with criterion(8, "NTU fixture files parse to documented results; "
                      "malformed input raises structured errors; "
                      "preprocessing is deterministic and NaN-free"):
        pose = np.zeros((25, 3))
        pose[:, 1] = np.linspace(0.0, 1.0, 25)
        moved = pose + np.array([0.3, 0.0, 0.1])

        # well-formed two-frame clip
        frames = parse_ntu_skeleton(io.StringIO(_ntu_text([[pose], [moved]])))
        assert len(frames) == 2 and len(frames[0]) == 1
        np.testing.assert_allclose(frames[1][0], moved)

        # empty-body frame is kept as an empty list
        frames = parse_ntu_skeleton(io.StringIO(_ntu_text([[pose], []])))
        assert frames[1] == []

        # truncated file: header promises more frames than present
        text = _ntu_text([[pose]])
        truncated = "\n".join(["2"] + text.splitlines()[1:]) + "\n"
        with pytest.raises(SkeletonParseError) as exc:
            parse_ntu_skeleton(io.StringIO(truncated))
        assert exc.value.line > 0

        # wrong joint count
        with pytest.raises(SkeletonParseError):
            parse_ntu_skeleton(io.StringIO("1\n1\n0 0 0 0 0 0 0 0 0 2\n24\n"))

        # non-numeric coordinate
        bad = _ntu_text([[pose]]).replace("0.0 ", "oops ", 1)
        with pytest.raises(SkeletonParseError):
            parse_ntu_skeleton(io.StringIO(bad))

        # parse -> preprocess is deterministic and NaN-free
        graph = ntu_graph()
        raw = _ntu_text([[pose], [moved]])
        clips = [preprocess_clip(parse_ntu_skeleton(io.StringIO(raw)),
                                 target_t=8, graph=graph) for _ in range(2)]
        assert not np.isnan(clips[0].data).any()
        np.testing.assert_array_equal(clips[0].data, clips[1].data)
        assert clips[0].data.shape == (3, 8, 25, 2)


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "deterministic training runs with equal seeds write "
                      "byte-identical metrics files"):
        data_path = tmp_path / "tiny.clips"
        run_synth(str(data_path), seed=5, num_classes=2, clips_per_class=8,
                  frames=12, joints=11, noise=0.02)
        config = TrainConfig(epochs=3, batch_size=8, base_lr=0.01,
                             lr_drop_epochs=(), seed=7)
        for name in ("run-a", "run-b"):
            run_train(str(data_path), "t-tr", str(tmp_path / name),
                      train_config=config, deterministic=True)
        metrics_a = (tmp_path / "run-a" / "metrics.jsonl").read_bytes()
        metrics_b = (tmp_path / "run-b" / "metrics.jsonl").read_bytes()
        assert metrics_a == metrics_b
        assert len(metrics_a.splitlines()) == 2 * config.epochs
        for line in metrics_a.splitlines():
            record = json.loads(line)
            assert record["seconds"] == 0.0
