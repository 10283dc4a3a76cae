"""HTTP endpoints: payload validation, error mapping, and one full
train/infer/eval round trip over the wire."""

import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import tiny_run_config
from prosynth.pipeline import RunConfig
from prosynth.service import create_app
from prosynth.service.schemas import RunConfigModel


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_schema_mirrors_run_config():
    # same field names and same defaults, or configs and request bodies drift
    model = RunConfigModel()
    assert model.model_dump() == RunConfig().to_dict()


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_synth_corpus_endpoint(client, tmp_path):
    r = client.post("/synth-corpus",
                    json={"out_dir": str(tmp_path / "c"), "size": 3, "seed": 2})
    assert r.status_code == 200
    body = r.json()
    assert body["size"] == 3
    assert body["mel_bins"] == 16
    assert (tmp_path / "c" / "meta.jsonl").exists()


def test_synth_corpus_bad_size(client, tmp_path):
    r = client.post("/synth-corpus",
                    json={"out_dir": str(tmp_path / "c"), "size": 0, "seed": 2})
    assert r.status_code == 422
    assert r.json()["error_type"] == "validation"


def test_unknown_config_key_is_validation(client, tmp_path):
    r = client.post("/train/stage1",
                    json={"config": {"corpus_dir": "x", "out_dir": "y",
                                     "not_a_field": 1}})
    assert r.status_code == 422
    assert r.json()["error_type"] == "validation"


def test_missing_corpus_is_validation(client, tmp_path):
    cfg = RunConfigModel(corpus_dir=str(tmp_path / "nowhere"),
                         out_dir=str(tmp_path / "out")).model_dump()
    r = client.post("/train/stage1", json={"config": cfg})
    assert r.status_code == 422
    assert r.json()["error_type"] == "validation"


def test_divergence_maps_to_500(client, shared_corpus, tmp_path):
    cfg = tiny_run_config(shared_corpus, tmp_path / "d",
                          stage1_steps=40, stage1_lr=1e8).to_dict()
    with np.errstate(over="ignore", invalid="ignore"):
        r = client.post("/train/stage1", json={"config": cfg})
    assert r.status_code == 500
    assert r.json()["error_type"] == "divergence"
    assert "non-finite" in r.json()["message"]


def test_train_chain_over_http(client, shared_corpus, tmp_path):
    cfg = tiny_run_config(shared_corpus, tmp_path / "run", stage1_steps=4,
                          sampler_epochs=1, dur_epochs=1).to_dict()
    r1 = client.post("/train/stage1", json={"config": cfg})
    assert r1.status_code == 200
    assert Path(r1.json()["checkpoint_dir"]).exists()
    r2 = client.post("/train/sampler",
                     json={"config": cfg, "stage1_dir": r1.json()["checkpoint_dir"],
                           "variant": None})
    assert r2.status_code == 200
    assert r2.json()["variant"] == "semantic"
    r3 = client.post("/train/duration",
                     json={"config": cfg, "sampler_dir": r2.json()["checkpoint_dir"]})
    assert r3.status_code == 200
    assert r3.json()["prosody_conditioned"] is True


def test_wrong_stage_checkpoint_is_validation(client, trained_chain, tmp_path):
    cfg = trained_chain["config"].to_dict()
    r = client.post("/train/sampler",
                    json={"config": cfg,
                          "stage1_dir": trained_chain["duration"]["checkpoint_dir"],
                          "variant": None})
    assert r.status_code == 422
    assert r.json()["error_type"] == "validation"


def test_infer_endpoint(client, trained_chain, tmp_path):
    ck = json.loads((Path(trained_chain["duration"]["checkpoint_dir"])
                     / "manifest.json").read_text())
    utt = ck["extra"]["heldout_ids"][0]
    r = client.post("/infer", json={
        "stage1_dir": trained_chain["stage1"]["checkpoint_dir"],
        "sampler_dir": trained_chain["sampler"]["checkpoint_dir"],
        "duration_dir": trained_chain["duration"]["checkpoint_dir"],
        "corpus_dir": str(trained_chain["corpus"]),
        "utt_id": utt,
        "out_path": str(tmp_path / "m.ktns"),
    })
    assert r.status_code == 200
    body = r.json()
    assert body["frames"] == sum(body["durations"])
    assert Path(body["mel_path"]).exists()


def test_eval_endpoint(client, trained_chain, tmp_path):
    r = client.post("/eval", json={
        "stage1_dir": trained_chain["stage1"]["checkpoint_dir"],
        "sampler_dir": trained_chain["sampler"]["checkpoint_dir"],
        "duration_dir": trained_chain["duration"]["checkpoint_dir"],
        "corpus_dir": str(trained_chain["corpus"]),
        "out_dir": str(tmp_path / "ev"),
    })
    assert r.status_code == 200
    body = r.json()
    assert sorted(body["conditions"]) == ["oracle", "prior", "sampler"]
    assert Path(body["csv"]).exists()
    assert Path(body["dat"]).exists()
