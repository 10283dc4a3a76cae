import numpy as np
import pytest

from prosynth.corpus import synth_corpus
from prosynth.pipeline import RunConfig, train_duration, train_sampler, train_stage1


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def shared_corpus(tmp_path_factory):
    """24-sentence corpus reused by pipeline, service, and CLI tests."""
    d = tmp_path_factory.mktemp("corpus")
    synth_corpus(d, 24, seed=11)
    return d


def tiny_run_config(corpus_dir, out_dir, **overrides) -> RunConfig:
    base = dict(
        corpus_dir=str(corpus_dir), out_dir=str(out_dir), seed=5,
        stage1_steps=20, sampler_epochs=3, dur_epochs=3, batch_size=4,
        ramp_start=2, ramp_end=10,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def trained_chain(shared_corpus, tmp_path_factory):
    """One small stage1 -> sampler -> duration chain, trained once per session."""
    out = tmp_path_factory.mktemp("chain")
    config = tiny_run_config(shared_corpus, out)
    s1 = train_stage1(config)
    s2 = train_sampler(config, s1["checkpoint_dir"])
    s3 = train_duration(config, s2["checkpoint_dir"])
    return {
        "config": config,
        "corpus": shared_corpus,
        "stage1": s1,
        "sampler": s2,
        "duration": s3,
    }
