"""HTTP service tests exercised through the in-process test client."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sttr.formats import read_clips, read_scores, write_scores, ScoreTable
from sttr.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_synth_writes_packed_clips(client, tmp_path):
    out = tmp_path / "toy.clips"
    r = client.post("/synth", json={"out_path": str(out), "seed": 3,
                                    "num_classes": 3, "clips_per_class": 5,
                                    "frames": 16, "joints": 25})
    assert r.status_code == 200
    body = r.json()
    assert body["clips"] == 15
    data, labels = read_clips(str(out))
    assert data.shape == (15, 3, 16, 25, 1)
    assert sorted(set(labels.tolist())) == [0, 1, 2]


def test_synth_rejects_bad_request(client, tmp_path):
    r = client.post("/synth", json={"out_path": str(tmp_path / "x.clips"),
                                    "num_classes": 1})
    assert r.status_code == 422


def test_parse_ntu_missing_dir_is_client_error(client, tmp_path):
    r = client.post("/parse-ntu", json={"input_dir": str(tmp_path / "nope"),
                                        "out_path": str(tmp_path / "o.clips")})
    assert r.status_code == 422
    body = r.json()
    assert "error" in body and "detail" in body


def test_train_eval_fuse_roundtrip(client, tmp_path):
    data_path = tmp_path / "toy.clips"
    client.post("/synth", json={"out_path": str(data_path), "seed": 0,
                                "num_classes": 2, "clips_per_class": 10,
                                "frames": 12, "joints": 11})
    run_dir = tmp_path / "run-s"
    r = client.post("/train", json={
        "data_path": str(data_path), "stream": "s-tr",
        "run_dir": str(run_dir), "epochs": 2, "batch_size": 8,
        "base_lr": 0.01, "lr_drop_epochs": [], "seed": 0,
        "deterministic": True})
    assert r.status_code == 200
    body = r.json()
    assert (run_dir / "model.ckpt").exists()
    assert (run_dir / "metrics.jsonl").exists()
    assert (run_dir / "eval.scores").exists()
    assert 0.0 <= body["eval_accuracy"] <= 1.0

    scores_out = tmp_path / "re-eval.scores"
    r = client.post("/eval", json={"checkpoint": str(run_dir / "model.ckpt"),
                                   "data_path": str(data_path),
                                   "scores_out": str(scores_out)})
    assert r.status_code == 200
    table = read_scores(str(scores_out))
    assert table.probs.shape[1] == 2

    fused_out = tmp_path / "fused.scores"
    r = client.post("/fuse", json={"a_path": str(scores_out),
                                   "b_path": str(scores_out),
                                   "out_path": str(fused_out)})
    assert r.status_code == 200
    fused = read_scores(str(fused_out))
    np.testing.assert_allclose(fused.probs, 2.0 * table.probs, atol=1e-6)


def test_train_missing_data_is_client_error(client, tmp_path):
    r = client.post("/train", json={"data_path": str(tmp_path / "absent.clips"),
                                    "stream": "t-tr",
                                    "run_dir": str(tmp_path / "r")})
    assert r.status_code == 422


def test_fuse_mismatched_ids_is_client_error(client, tmp_path):
    a = tmp_path / "a.scores"
    b = tmp_path / "b.scores"
    write_scores(str(a), ScoreTable(["x", "y"], np.array([0, 1]),
                                    np.array([[0.9, 0.1], [0.2, 0.8]])))
    write_scores(str(b), ScoreTable(["x", "z"], np.array([0, 1]),
                                    np.array([[0.9, 0.1], [0.2, 0.8]])))
    r = client.post("/fuse", json={"a_path": str(a), "b_path": str(b),
                                   "out_path": str(tmp_path / "f.scores")})
    assert r.status_code == 422


def test_params_endpoint_matches_reference_counts(client):
    r = client.post("/params", json={"channels": 256})
    assert r.status_code == 200
    units = r.json()["units"]
    assert units["tcn"]["weights"] == 589824
    assert units["gcn"]["total"] == 199251


def test_params_with_network_itemization(client):
    r = client.post("/params", json={"channels": 64, "stream": "s-tr",
                                     "plan": "desk", "num_classes": 4})
    assert r.status_code == 200
    net = r.json()["network"]
    assert net["stream"] == "s-tr"
    assert net["total"] == sum(l["total"] for l in net["per_layer"]) + net["classifier"]


def test_gradcheck_endpoint(client):
    r = client.post("/gradcheck", json={"seeds": 1, "include_streams": False})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"]
    assert body["max_rel_error"] < body["tolerance"]
    assert all(c["passed"] for c in body["cases"])
