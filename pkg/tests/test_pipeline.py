"""Orchestration layer: config handling, checkpoint lineage, the three
training stages, inference, and held-out evaluation."""

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import tiny_run_config
from prosynth.acoustic import AcousticConfig, reference_encode
from prosynth.corpus import load_corpus
from prosynth.diffcore import ParamStore, TrainingDivergenceError, read_ktns
from prosynth.durmodel import compute_group_stats, default_grouping
from prosynth.pipeline import (
    PipelineError,
    RunConfig,
    aligned_mel_mse,
    compute_checkpoint_hash,
    load_checkpoint,
    mel_mse,
    run_eval,
    run_inference,
    save_checkpoint,
    train_stage1,
    verify_parent,
)
from prosynth.pipeline.evaluation import _dtw


# run config ---------------------------------------------------------------

def test_config_roundtrip():
    c = RunConfig(corpus_dir="c", out_dir="o", latent_dim=4, reverse_kl=True)
    assert RunConfig.from_dict(c.to_dict()) == c


def test_config_rejects_unknown_keys():
    with pytest.raises(PipelineError, match="bogus"):
        RunConfig.from_dict({"corpus_dir": "c", "bogus": 1})


def test_config_rejects_bad_values():
    with pytest.raises(PipelineError, match="variant"):
        RunConfig(sampler_variant="nope")
    with pytest.raises(PipelineError, match="fraction"):
        RunConfig(train_fraction=1.0)
    with pytest.raises(PipelineError, match="batch"):
        RunConfig(batch_size=0)


def test_config_from_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"corpus_dir": "c", "out_dir": "o", "seed": 9}))
    assert RunConfig.from_file(p).seed == 9
    with pytest.raises(PipelineError, match="not found"):
        RunConfig.from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(PipelineError, match="JSON"):
        RunConfig.from_file(bad)


def test_config_corpus_mismatch(shared_corpus):
    _, corpus_config = load_corpus(shared_corpus)
    rc = RunConfig(corpus_dir=str(shared_corpus), out_dir="o",
                   mel_bins=corpus_config.mel_bins + 1)
    with pytest.raises(PipelineError, match="mel_bins"):
        rc.validate_against_corpus(corpus_config)


# checkpoints --------------------------------------------------------------

def _small_store(rng) -> ParamStore:
    store = ParamStore()
    store.add("a/w", rng.standard_normal((3, 2)).astype(np.float32))
    store.add("a/b", rng.standard_normal((1, 2)).astype(np.float32))
    return store


def test_checkpoint_roundtrip(tmp_path, rng):
    store = _small_store(rng)
    h = save_checkpoint(tmp_path / "ck", "stage1", 7, store, {"seed": 1},
                        extra={"note": "x"})
    ck = load_checkpoint(tmp_path / "ck", expect_stage="stage1")
    assert ck.hash == h
    assert ck.stage == "stage1"
    assert ck.manifest["step"] == 7
    assert ck.extra == {"note": "x"}
    assert ck.run_config == {"seed": 1}
    for name in store.names():
        assert np.array_equal(ck.store[name].data, store[name].data)


def test_checkpoint_rejects_unknown_stage(tmp_path, rng):
    with pytest.raises(PipelineError, match="stage"):
        save_checkpoint(tmp_path / "ck", "stage9", 0, _small_store(rng), {})


def test_checkpoint_wrong_stage_on_load(tmp_path, rng):
    save_checkpoint(tmp_path / "ck", "sampler", 0, _small_store(rng), {})
    with pytest.raises(PipelineError, match="expected 'stage1'"):
        load_checkpoint(tmp_path / "ck", expect_stage="stage1")


def test_checkpoint_hash_covers_tensor_bytes(tmp_path, rng):
    h = save_checkpoint(tmp_path / "ck", "stage1", 0, _small_store(rng), {})
    f = tmp_path / "ck" / "tensors" / "a__w.ktns"
    raw = bytearray(f.read_bytes())
    raw[-1] ^= 0xFF
    f.write_bytes(bytes(raw))
    assert compute_checkpoint_hash(tmp_path / "ck") != h


def test_checkpoint_hash_covers_manifest(tmp_path, rng):
    h = save_checkpoint(tmp_path / "ck", "stage1", 0, _small_store(rng), {})
    m = tmp_path / "ck" / "manifest.json"
    m.write_text(m.read_text() + "\n")
    assert compute_checkpoint_hash(tmp_path / "ck") != h


def test_checkpoint_missing_tensor_file(tmp_path, rng):
    save_checkpoint(tmp_path / "ck", "stage1", 0, _small_store(rng), {})
    (tmp_path / "ck" / "tensors" / "a__b.ktns").unlink()
    with pytest.raises(PipelineError, match="missing tensor"):
        compute_checkpoint_hash(tmp_path / "ck")


def test_verify_parent(tmp_path, rng):
    ha = save_checkpoint(tmp_path / "a", "stage1", 0, _small_store(rng), {})
    save_checkpoint(tmp_path / "b", "stage1", 0, _small_store(rng), {"other": 1})
    save_checkpoint(tmp_path / "child", "sampler", 0, _small_store(rng), {},
                    parent_hash=ha)
    child = load_checkpoint(tmp_path / "child")
    verify_parent(child, load_checkpoint(tmp_path / "a"))
    with pytest.raises(PipelineError, match="lineage"):
        verify_parent(child, load_checkpoint(tmp_path / "b"))


# training stages ----------------------------------------------------------

def test_stage1_outputs(trained_chain):
    s1 = trained_chain["stage1"]
    lines = Path(s1["csv"]).read_text().strip().splitlines()
    assert lines[0] == "step,recon,kl,alpha"
    assert len(lines) == 1 + s1["steps"]
    ck = load_checkpoint(s1["checkpoint_dir"], expect_stage="stage1")
    assert ck.hash == s1["checkpoint_hash"]
    assert len(ck.extra["train_ids"]) + len(ck.extra["heldout_ids"]) == 24
    assert ck.extra["acoustic_config"]["mel_bins"] == 16
    assert ck.manifest["parent_hash"] is None


def test_stage1_same_seed_same_tensors(shared_corpus, tmp_path):
    ra = train_stage1(tiny_run_config(shared_corpus, tmp_path / "a", stage1_steps=6))
    rb = train_stage1(tiny_run_config(shared_corpus, tmp_path / "b", stage1_steps=6))
    ma = json.loads((Path(ra["checkpoint_dir"]) / "manifest.json").read_text())
    for name, rel in ma["tensors"].items():
        ba = (Path(ra["checkpoint_dir"]) / rel).read_bytes()
        bb = (Path(rb["checkpoint_dir"]) / rel).read_bytes()
        assert ba == bb, name
    assert Path(ra["csv"]).read_bytes() == Path(rb["csv"]).read_bytes()


def test_stage1_different_seed_differs(shared_corpus, tmp_path):
    ra = train_stage1(tiny_run_config(shared_corpus, tmp_path / "a", stage1_steps=6))
    rb = train_stage1(tiny_run_config(shared_corpus, tmp_path / "b", stage1_steps=6,
                                      seed=77))
    ma = json.loads((Path(ra["checkpoint_dir"]) / "manifest.json").read_text())
    same = all((Path(ra["checkpoint_dir"]) / rel).read_bytes()
               == (Path(rb["checkpoint_dir"]) / rel).read_bytes()
               for rel in ma["tensors"].values())
    assert not same


def test_stage1_divergence(shared_corpus, tmp_path):
    cfg = tiny_run_config(shared_corpus, tmp_path / "d",
                          stage1_steps=40, stage1_lr=1e8)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergenceError, match="non-finite"):
            train_stage1(cfg)


def test_sampler_outputs(trained_chain):
    s2 = trained_chain["sampler"]
    ck = load_checkpoint(s2["checkpoint_dir"], expect_stage="sampler")
    # lineage: recorded parent hash must match the stage-1 directory right now,
    # i.e. sampler training left the parent untouched
    assert ck.manifest["parent_hash"] == trained_chain["stage1"]["checkpoint_hash"]
    assert ck.manifest["parent_hash"] == compute_checkpoint_hash(
        trained_chain["stage1"]["checkpoint_dir"])
    lines = Path(s2["csv"]).read_text().strip().splitlines()
    assert lines[0] == "epoch,train_kl,heldout_kl"
    assert len(lines) == 1 + s2["epochs"]
    assert s2["final_heldout_kl"] < s2["first_heldout_kl"]
    assert ck.extra["variant"] == "semantic"
    assert ck.extra["passes"] == 1


def test_duration_outputs(trained_chain):
    s3 = trained_chain["duration"]
    ck = load_checkpoint(s3["checkpoint_dir"], expect_stage="duration")
    assert ck.manifest["parent_hash"] == trained_chain["sampler"]["checkpoint_hash"]
    assert s3["final_loss"] < s3["first_loss"]
    assert s3["prosody_conditioned"] is True


def test_duration_manifest_group_stats_exact(trained_chain):
    ck = load_checkpoint(trained_chain["duration"]["checkpoint_dir"])
    utts, corpus_config = load_corpus(trained_chain["corpus"])
    by_id = {u.id: u for u in utts}
    train = [by_id[i] for i in ck.extra["train_ids"]]
    rebuilt = compute_group_stats(train, default_grouping(corpus_config.phoneme_inventory))
    assert ck.extra["group_stats"] == rebuilt.to_dict()


# inference ----------------------------------------------------------------

def _chain_args(trained_chain):
    return (trained_chain["stage1"]["checkpoint_dir"],
            trained_chain["sampler"]["checkpoint_dir"],
            trained_chain["duration"]["checkpoint_dir"],
            trained_chain["corpus"])


def _heldout_id(trained_chain, k=0) -> str:
    ck = load_checkpoint(trained_chain["duration"]["checkpoint_dir"])
    return ck.extra["heldout_ids"][k]


def test_infer_deterministic(trained_chain, tmp_path):
    utt = _heldout_id(trained_chain)
    a = run_inference(*_chain_args(trained_chain), utt, tmp_path / "a.ktns")
    b = run_inference(*_chain_args(trained_chain), utt, tmp_path / "b.ktns")
    assert Path(a["mel_path"]).read_bytes() == Path(b["mel_path"]).read_bytes()
    assert (json.loads(Path(a["sidecar_path"]).read_text())
            == json.loads(Path(b["sidecar_path"]).read_text()))


def test_infer_frames_match_durations(trained_chain, tmp_path):
    res = run_inference(*_chain_args(trained_chain), _heldout_id(trained_chain),
                        tmp_path / "m.ktns")
    mel = read_ktns(res["mel_path"])
    assert res["frames"] == sum(res["durations"]) == mel.shape[0]
    sidecar = json.loads(Path(res["sidecar_path"]).read_text())
    assert sidecar["durations"] == res["durations"]
    assert sidecar["condition"] == "sampler"


def test_infer_temperature_sampling(trained_chain, tmp_path):
    utt = _heldout_id(trained_chain)
    base = run_inference(*_chain_args(trained_chain), utt, tmp_path / "t0.ktns")
    t1a = run_inference(*_chain_args(trained_chain), utt, tmp_path / "t1a.ktns",
                        temperature=1.0, seed=1)
    t1b = run_inference(*_chain_args(trained_chain), utt, tmp_path / "t1b.ktns",
                        temperature=1.0, seed=1)
    t1c = run_inference(*_chain_args(trained_chain), utt, tmp_path / "t1c.ktns",
                        temperature=1.0, seed=2)
    za = json.loads(Path(t1a["sidecar_path"]).read_text())["z"]
    zb = json.loads(Path(t1b["sidecar_path"]).read_text())["z"]
    zc = json.loads(Path(t1c["sidecar_path"]).read_text())["z"]
    z0 = json.loads(Path(base["sidecar_path"]).read_text())["z"]
    assert za == zb
    assert za != zc
    assert za != z0


def test_infer_oracle_z(trained_chain, tmp_path):
    utt_id = _heldout_id(trained_chain)
    res = run_inference(*_chain_args(trained_chain), utt_id, tmp_path / "o.ktns",
                        use_oracle_z=True)
    assert res["condition"] == "oracle"
    stage1 = load_checkpoint(trained_chain["stage1"]["checkpoint_dir"])
    aconfig = AcousticConfig.from_dict(stage1.extra["acoustic_config"])
    utts, _ = load_corpus(trained_chain["corpus"])
    utt = next(u for u in utts if u.id == utt_id)
    posterior = reference_encode(utt.mel.frames, stage1.store, aconfig)
    z = json.loads(Path(res["sidecar_path"]).read_text())["z"]
    assert np.array_equal(np.asarray(z, dtype=np.float32),
                          posterior.mean.data.reshape(-1))


def test_infer_unknown_utterance(trained_chain, tmp_path):
    with pytest.raises(PipelineError, match="not found"):
        run_inference(*_chain_args(trained_chain), "no-such-utt", tmp_path / "x.ktns")


def test_infer_chain_mismatch(shared_corpus, trained_chain, tmp_path):
    foreign = train_stage1(tiny_run_config(shared_corpus, tmp_path / "f",
                                           stage1_steps=4, seed=99))
    with pytest.raises(PipelineError, match="lineage"):
        run_inference(foreign["checkpoint_dir"],
                      trained_chain["sampler"]["checkpoint_dir"],
                      trained_chain["duration"]["checkpoint_dir"],
                      trained_chain["corpus"],
                      _heldout_id(trained_chain), tmp_path / "x.ktns")


# evaluation ---------------------------------------------------------------

def test_eval_report_structure(trained_chain, tmp_path):
    res = run_eval(*_chain_args(trained_chain), tmp_path / "ev")
    assert sorted(res["conditions"]) == ["oracle", "prior", "sampler"]
    lines = Path(res["csv"]).read_text().strip().splitlines()
    assert lines[0].startswith("condition,")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["prior", "sampler", "oracle"]
    dat = Path(res["dat"]).read_text()
    assert dat.startswith("#")
    assert res["conditions"]["oracle"]["heldout_kl"] == 0.0


def test_eval_reproducible(trained_chain, tmp_path):
    a = run_eval(*_chain_args(trained_chain), tmp_path / "a")
    b = run_eval(*_chain_args(trained_chain), tmp_path / "b")
    assert Path(a["csv"]).read_bytes() == Path(b["csv"]).read_bytes()
    assert Path(a["dat"]).read_bytes() == Path(b["dat"]).read_bytes()


def test_eval_kl_consistent_with_sampler_manifest(trained_chain, tmp_path):
    res = run_eval(*_chain_args(trained_chain), tmp_path / "ev")
    ck = load_checkpoint(trained_chain["sampler"]["checkpoint_dir"])
    assert res["conditions"]["prior"]["heldout_kl"] == pytest.approx(
        ck.extra["prior_heldout_kl"], rel=1e-9)
    # manifest value went through the CSV's 6-decimal formatting
    assert res["conditions"]["sampler"]["heldout_kl"] == pytest.approx(
        ck.extra["final_heldout_kl"], abs=1e-6)


# alignment oracle ---------------------------------------------------------

def _all_monotone_paths(t1, t2):
    def go(i, j, acc):
        acc = acc + [(i, j)]
        if i == t1 - 1 and j == t2 - 1:
            yield acc
            return
        if i + 1 < t1 and j + 1 < t2:
            yield from go(i + 1, j + 1, acc)
        if i + 1 < t1:
            yield from go(i + 1, j, acc)
        if j + 1 < t2:
            yield from go(i, j + 1, acc)
    yield from go(0, 0, [])


@pytest.mark.parametrize("shape", [(3, 4), (4, 3), (5, 5), (1, 6), (6, 1)])
def test_dtw_matches_exhaustive_search(shape, rng):
    # brute force over every monotone path, independent of the DP
    for _ in range(5):
        cost = rng.random(shape)
        paths = list(_all_monotone_paths(*shape))
        totals = [sum(cost[i, j] for i, j in p) for p in paths]
        best = min(totals)
        total, length = _dtw(cost)
        assert total == pytest.approx(best, rel=1e-12)
        optimal_lengths = {len(p) for p, t in zip(paths, totals)
                           if t <= best + 1e-12}
        assert length in optimal_lengths


def test_aligned_mse_identity(rng):
    x = rng.random((7, 4))
    assert aligned_mel_mse(x, x) == 0.0


def test_aligned_mse_validation(rng):
    with pytest.raises(PipelineError, match="alignment"):
        aligned_mel_mse(rng.random((4, 3)), rng.random((4, 5)))


def test_mel_mse_validation(rng):
    with pytest.raises(PipelineError, match="equal shapes"):
        mel_mse(rng.random((4, 3)), rng.random((5, 3)))
    x = rng.random((4, 3))
    assert mel_mse(x, x) == 0.0
