"""Held-out evaluation under three latent conditions.

Listening tests need humans; everything here is an objective proxy.  Each
condition fixes where the prosody latent comes from:

    prior    z = 0 (the prior mean, no text or audio information)
    sampler  z = predicted mean from the trained text sampler
    oracle   z = posterior mean from the reference encoder on the real mel

and reports mel error with ground-truth durations (frame-aligned MSE), mel
error with predicted durations (alignment-normalized via dynamic
programming), duration RMSE, and the mean held-out KL of that condition's
latent predictor against the reference posterior.
"""

from __future__ import annotations

import numpy as np

from ..acoustic import AcousticConfig, PhonemeVocab, decode, encode_phonemes, reference_encode, upsample
from ..corpus import load_corpus
from ..diffcore import constant
from ..durmodel import DurModelConfig, GroupStats, predict_durations
from ..samplers import GaussianLatent, SamplerConfig, kl_divergence, prepare_sampler_input, sampler_forward
from ..syntax import LabelVocab
from .config import PipelineError
from .inference import load_chain

CONDITIONS = ("prior", "sampler", "oracle")


def mel_mse(pred: np.ndarray, ref: np.ndarray) -> float:
    if pred.shape != ref.shape:
        raise PipelineError(
            f"frame-aligned MSE needs equal shapes, got {pred.shape} vs {ref.shape}")
    return float(np.mean((pred.astype(np.float64) - ref.astype(np.float64)) ** 2))


def _dtw(cost: np.ndarray) -> tuple[float, int]:
    """Minimum-total monotone alignment over a cost matrix.

    Moves are right, down, diagonal.  Returns the accumulated optimum and the
    cell count of one optimal path (ties broken toward the diagonal).
    """
    t1, t2 = cost.shape
    acc = np.full((t1, t2), np.inf)
    acc[0, 0] = cost[0, 0]
    for j in range(1, t2):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, t1):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        row_prev = acc[i - 1]
        row = acc[i]
        for j in range(1, t2):
            row[j] = cost[i, j] + min(row_prev[j - 1], row_prev[j], row[j - 1])
    i, j = t1 - 1, t2 - 1
    length = 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        length += 1
    return float(acc[t1 - 1, t2 - 1]), length


def aligned_mel_mse(pred: np.ndarray, ref: np.ndarray) -> float:
    """Mean per-cell cost along the best monotone frame alignment.

    Cell cost is the mean squared difference over mel bins; the accumulated
    optimum is normalized by the backtracked path length so sequences of
    different lengths compare fairly.
    """
    if pred.ndim != 2 or ref.ndim != 2 or pred.shape[1] != ref.shape[1]:
        raise PipelineError(
            f"alignment needs [T, B] inputs with equal B, got {pred.shape} vs {ref.shape}")
    a = pred.astype(np.float64)
    b = ref.astype(np.float64)
    # cost[i, j] = mean_b (a_i - b_j)^2
    cost = np.mean((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    total, length = _dtw(cost)
    return total / length


def _standard_latent(dim: int) -> GaussianLatent:
    zero = np.zeros((1, dim), dtype=np.float32)
    return GaussianLatent(mean=constant(zero), log_var=constant(zero.copy()))


def _fmt(x: float) -> str:
    return "%.10f" % x


def run_eval(stage1_dir, sampler_dir, duration_dir, corpus_dir, out_dir) -> dict:
    from pathlib import Path

    stage1, sampler, duration = load_chain(stage1_dir, sampler_dir, duration_dir)
    aconfig = AcousticConfig.from_dict(stage1.extra["acoustic_config"])
    sconfig = SamplerConfig.from_dict(sampler.extra["sampler_config"])
    dconfig = DurModelConfig.from_dict(duration.extra["dur_config"])
    stats = GroupStats.from_dict(duration.extra["group_stats"])
    phoneme_vocab = PhonemeVocab(stage1.extra["phoneme_inventory"])
    label_vocab = (LabelVocab.from_list(sampler.extra["label_vocab"])
                   if sampler.extra["label_vocab"] else None)

    heldout_ids = duration.extra["heldout_ids"]
    utts, _ = load_corpus(corpus_dir)
    by_id = {u.id: u for u in utts}
    missing = [i for i in heldout_ids if i not in by_id]
    if missing:
        raise PipelineError(f"held-out utterances missing from corpus: {missing[:3]}")
    held = [by_id[i] for i in heldout_ids]
    if not held:
        raise PipelineError("empty held-out split in duration checkpoint")

    results = {}
    for condition in CONDITIONS:
        teacher_mses = []
        aligned_mses = []
        dur_errors: list[float] = []
        kls = []
        for utt in held:
            target = reference_encode(utt.mel.frames, stage1.store, aconfig)
            if condition == "prior":
                z = np.zeros((1, aconfig.latent_dim), dtype=np.float32)
                kl = kl_divergence(_standard_latent(aconfig.latent_dim), target,
                                   reverse=sconfig.reverse_kl)
            elif condition == "sampler":
                inp = prepare_sampler_input(utt, sconfig)
                pred = sampler_forward(sampler.store, sconfig, label_vocab,
                                       embeddings=inp.embeddings, graph=inp.graph)
                z = pred.mean.data.astype(np.float32)
                kl = kl_divergence(pred, target, reverse=sconfig.reverse_kl)
            else:
                z = target.mean.data.astype(np.float32)
                kl = kl_divergence(target, target, reverse=sconfig.reverse_kl)
            kls.append(float(kl.data))

            dur_z = z if dconfig.z_dim > 0 else None
            pred_durations = predict_durations(utt.phonemes, duration.store,
                                               phoneme_vocab, dconfig, stats, dur_z)
            dur_errors.extend(float(p - t) for p, t in zip(pred_durations, utt.durations))

            y = encode_phonemes(utt.phonemes, stage1.store, phoneme_vocab, aconfig)
            zt = constant(z)
            mel_teacher_dur = decode(upsample(y, utt.durations), zt, stage1.store, aconfig)
            teacher_mses.append(mel_mse(mel_teacher_dur.data, utt.mel.frames))
            mel_free_dur = decode(upsample(y, pred_durations), zt, stage1.store, aconfig)
            aligned_mses.append(aligned_mel_mse(mel_free_dur.data, utt.mel.frames))

        errs = np.asarray(dur_errors, dtype=np.float64)
        results[condition] = {
            "teacher_dur_mel_mse": float(np.mean(teacher_mses)),
            "aligned_mel_mse": float(np.mean(aligned_mses)),
            "duration_rmse": float(np.sqrt(np.mean(errs ** 2))),
            "heldout_kl": float(np.mean(kls)),
        }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = ["teacher_dur_mel_mse", "aligned_mel_mse", "duration_rmse", "heldout_kl"]
    csv_path = out_dir / "eval.csv"
    with open(csv_path, "w") as fh:
        fh.write("condition," + ",".join(columns) + "\n")
        for condition in CONDITIONS:
            row = results[condition]
            fh.write(condition + "," + ",".join(_fmt(row[c]) for c in columns) + "\n")
    dat_path = out_dir / "eval.dat"
    with open(dat_path, "w") as fh:
        fh.write("# held-out evaluation, one row per latent condition\n")
        fh.write("# naturalness listening scores need human raters and are not\n")
        fh.write("# produced here; objective proxies stand in: mel error, duration\n")
        fh.write("# RMSE, and KL of each condition's latent predictor to the\n")
        fh.write("# reference posterior.\n")
        fh.write("# condition " + " ".join(columns) + "\n")
        for condition in CONDITIONS:
            row = results[condition]
            fh.write(condition + " " + " ".join(_fmt(row[c]) for c in columns) + "\n")
    return {
        "conditions": results,
        "csv": str(csv_path),
        "dat": str(dat_path),
        "heldout_size": len(held),
    }
