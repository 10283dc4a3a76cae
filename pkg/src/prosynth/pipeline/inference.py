"""Three-step inference: predict the prosody latent from text, predict
durations conditioned on it, then decode the mel free-running.

All three checkpoints must form a verified lineage (duration -> sampler ->
stage 1).  The latent defaults to the predicted mean; `temperature` scales
the predicted standard deviation before sampling, and `use_oracle_z` swaps in
the reference encoder's posterior mean computed from the utterance's ground
truth mel instead.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..acoustic import (
    AcousticConfig,
    PhonemeVocab,
    decode,
    encode_phonemes,
    reference_encode,
    upsample,
)
from ..corpus import load_corpus
from ..diffcore import constant, write_ktns
from ..durmodel import DurModelConfig, GroupStats, predict_durations
from ..samplers import SamplerConfig, prepare_sampler_input, sampler_forward
from ..syntax import LabelVocab
from .checkpoint import Checkpoint, load_checkpoint, verify_parent
from .config import PipelineError


def load_chain(stage1_dir, sampler_dir, duration_dir) -> tuple[Checkpoint, Checkpoint, Checkpoint]:
    stage1 = load_checkpoint(stage1_dir, expect_stage="stage1")
    sampler = load_checkpoint(sampler_dir, expect_stage="sampler")
    duration = load_checkpoint(duration_dir, expect_stage="duration")
    verify_parent(sampler, stage1)
    verify_parent(duration, sampler)
    return stage1, sampler, duration


def _find_utterance(corpus_dir, utt_id: str):
    utts, corpus_config = load_corpus(corpus_dir)
    for u in utts:
        if u.id == utt_id:
            return u, corpus_config
    raise PipelineError(f"utterance {utt_id!r} not found in {corpus_dir}")


def run_inference(stage1_dir, sampler_dir, duration_dir, corpus_dir, utt_id: str,
                  out_path, temperature: float = 0.0, use_oracle_z: bool = False,
                  seed: int = 0) -> dict:
    stage1, sampler, duration = load_chain(stage1_dir, sampler_dir, duration_dir)
    aconfig = AcousticConfig.from_dict(stage1.extra["acoustic_config"])
    sconfig = SamplerConfig.from_dict(sampler.extra["sampler_config"])
    dconfig = DurModelConfig.from_dict(duration.extra["dur_config"])
    stats = GroupStats.from_dict(duration.extra["group_stats"])
    phoneme_vocab = PhonemeVocab(stage1.extra["phoneme_inventory"])
    label_vocab = (LabelVocab.from_list(sampler.extra["label_vocab"])
                   if sampler.extra["label_vocab"] else None)

    utt, _ = _find_utterance(corpus_dir, utt_id)

    # step a: latent from text (or from the reference mel in oracle mode)
    if use_oracle_z:
        latent = reference_encode(utt.mel.frames, stage1.store, aconfig)
        z = latent.mean.data.copy()
        condition = "oracle"
    else:
        inp = prepare_sampler_input(utt, sconfig)
        latent = sampler_forward(sampler.store, sconfig, label_vocab,
                                 embeddings=inp.embeddings, graph=inp.graph)
        z = latent.mean.data.copy()
        if temperature > 0.0:
            rng = np.random.default_rng([seed, 7])
            sd = np.exp(0.5 * latent.log_var.data)
            z = z + temperature * sd * rng.standard_normal(z.shape).astype(z.dtype)
        condition = "sampler"
    z = z.astype(np.float32)

    # step b: durations, conditioned on the same z when the model wants one
    dur_z = z if dconfig.z_dim > 0 else None
    durations = predict_durations(utt.phonemes, duration.store, phoneme_vocab,
                                  dconfig, stats, dur_z)

    # step c: free-running decode over the upsampled encodings
    y = encode_phonemes(utt.phonemes, stage1.store, phoneme_vocab, aconfig)
    y_up = upsample(y, durations)
    mel = decode(y_up, constant(z), stage1.store, aconfig)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_ktns(out_path, mel.data)
    sidecar = {
        "utt_id": utt_id,
        "condition": condition,
        "temperature": temperature,
        "z": [float(v) for v in z.reshape(-1)],
        "durations": [int(d) for d in durations],
        "frames": int(mel.dims[0]),
        "mel_bins": int(mel.dims[1]),
    }
    sidecar_path = out_path.with_suffix(out_path.suffix + ".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return {
        "mel_path": str(out_path),
        "sidecar_path": str(sidecar_path),
        "frames": int(mel.dims[0]),
        "durations": [int(d) for d in durations],
        "condition": condition,
    }
