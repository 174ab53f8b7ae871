import numpy as np
import pytest

from sttr.formats import (FormatError, ScoreTable, fuse_scores, read_checkpoint,
                          read_clips, read_scores, write_checkpoint, write_clips,
                          write_scores)


def test_clip_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(3, 3, 4, 5, 2)).astype(np.float32)
    labels = np.array([0, 2, 1])
    path = tmp_path / "clips.sttr"
    write_clips(path, data, labels)
    back, labels_back = read_clips(path)
    np.testing.assert_array_equal(back, data)
    np.testing.assert_array_equal(labels_back, labels)


def test_clip_bad_magic(tmp_path):
    path = tmp_path / "bad.sttr"
    path.write_bytes(b"NOPE!" + b"\x00" * 40)
    with pytest.raises(FormatError):
        read_clips(path)


def test_clip_truncated(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "clips.sttr"
    write_clips(path, rng.normal(size=(2, 3, 4, 5, 1)).astype(np.float32), [0, 1])
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(FormatError):
        read_clips(path)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    config = {"stream": "s-tr", "layers": [1, 2], "heads": 2}
    blobs = {
        "layer.0.w": rng.normal(size=(3, 4)).astype(np.float32),
        "scalar": np.float32(2.5).reshape(()),
        "bias": rng.normal(size=(7,)).astype(np.float32),
    }
    path = tmp_path / "model.ckpt"
    write_checkpoint(path, config, blobs)
    cfg, back = read_checkpoint(path)
    assert cfg == config
    assert set(back) == set(blobs)
    for k in blobs:
        np.testing.assert_array_equal(back[k], blobs[k])


def test_checkpoint_bad_version(tmp_path):
    path = tmp_path / "model.ckpt"
    write_checkpoint(path, {}, {})
    blob = bytearray(path.read_bytes())
    blob[5] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        read_checkpoint(path)


def make_table(ids, labels, probs):
    return ScoreTable(list(ids), np.array(labels), np.array(probs, dtype=float))


def test_scores_round_trip(tmp_path):
    table = make_table(["a", "b"], [0, 1], [[0.75, 0.25], [0.1, 0.9]])
    path = tmp_path / "x.scores"
    write_scores(path, table)
    text = path.read_text()
    assert text.splitlines()[0] == "a\t0\t0.75,0.25"
    back = read_scores(path)
    assert back.sample_ids == ["a", "b"]
    np.testing.assert_allclose(back.probs, table.probs, atol=1e-8)


def test_fuse_opposed_tables_ties_to_class_zero():
    # softmax of logits (2,0) and (0,2)
    p = np.exp(2) / (1 + np.exp(2))
    a = make_table(["s"], [0], [[p, 1 - p]])
    b = make_table(["s"], [0], [[1 - p, p]])
    fused = fuse_scores(a, b)
    np.testing.assert_allclose(fused.probs, [[1.0, 1.0]], atol=1e-12)
    assert fused.predictions()[0] == 0


def test_fuse_uniform_addend_preserves_argmax():
    rng = np.random.default_rng(3)
    probs = rng.dirichlet(np.ones(4), size=6)
    a = make_table([f"s{i}" for i in range(6)], [0] * 6, probs)
    b = make_table([f"s{i}" for i in range(6)], [0] * 6, np.full((6, 4), 0.25))
    fused = fuse_scores(a, b)
    np.testing.assert_array_equal(fused.predictions(), a.predictions())


def test_fuse_commutative_and_order_insensitive():
    rng = np.random.default_rng(4)
    ids = ["x", "y", "z"]
    a = make_table(ids, [0, 1, 2], rng.dirichlet(np.ones(3), size=3))
    b = make_table(ids[::-1], [2, 1, 0], rng.dirichlet(np.ones(3), size=3)[::-1])
    ab = fuse_scores(a, b)
    b_sorted = make_table(ids, [0, 1, 2], b.probs[::-1])
    ba = fuse_scores(b_sorted, a)
    np.testing.assert_allclose(ab.probs, ba.probs, atol=1e-12)


def test_fuse_id_mismatch_lists_missing():
    a = make_table(["a", "b"], [0, 1], [[1, 0], [0, 1]])
    b = make_table(["a", "c"], [0, 1], [[1, 0], [0, 1]])
    with pytest.raises(FormatError) as exc:
        fuse_scores(a, b)
    assert "b" in str(exc.value) and "c" in str(exc.value)
