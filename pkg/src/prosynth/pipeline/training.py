"""The three training stages.

Stage 1 jointly trains the synthesis path (`enc/`, `dec/`) and the reference
encoder (`ref/`) on free-running reconstruction (ground-truth durations,
model-fed-back frames) plus an annealed KL to the prior.  Stage 2 freezes
everything from stage 1 and KL-matches a text-only
sampler to the reference posteriors.  Stage 3 freezes the sampler too and
trains the duration model on group-normalized targets, conditioning on fresh
draws z ~ N(mu_pred, sigma2_pred) when prosody conditioning is enabled.

Every stage writes a checkpoint directory plus a CSV curve, records the
utterance-id split in its manifest, and chains to its parent by hash.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..acoustic import (
    AcousticConfig,
    GaussianLatent,
    PhonemeVocab,
    anneal_alpha,
    decode,
    elbo_loss,
    encode_phonemes,
    init_acoustic_params,
    reference_encode,
    upsample,
)
from ..corpus import load_corpus, split_corpus
from ..diffcore import (
    AdamState,
    TrainingDivergenceError,
    adam_step,
    constant,
    reparameterize,
    tape,
)
from ..durmodel import (
    compute_group_stats,
    default_grouping,
    duration_train_step,
    init_duration_params,
)
from ..samplers import (
    detached_latent,
    init_sampler_params,
    kl_divergence,
    prepare_sampler_input,
    sampler_forward,
    sampler_kl_step,
)
from ..syntax import (
    LabelVocab,
    graph_diameter,
    message_pass_count,
    parse_penn,
    strip_words,
    tree_to_graph,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineError, RunConfig


def _write_csv(path, header: list[str], rows: list[list]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _load_validated(config: RunConfig):
    utts, corpus_config = load_corpus(config.corpus_dir)
    config.validate_against_corpus(corpus_config)
    return utts, corpus_config


def _select_by_ids(utts, ids: list[str], what: str):
    by_id = {u.id: u for u in utts}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise PipelineError(f"corpus lost {what} utterances: {missing[:5]}")
    return [by_id[i] for i in ids]


def train_stage1(config: RunConfig) -> dict:
    """ELBO training of the full acoustic model, free-running with
    ground-truth durations."""
    utts, corpus_config = _load_validated(config)
    train, heldout = split_corpus(utts, config.train_fraction, config.seed)
    aconfig = config.acoustic_config()
    schedule = config.anneal_schedule()
    vocab = PhonemeVocab(corpus_config.phoneme_inventory)
    rng = np.random.default_rng([config.seed, 1])
    store = init_acoustic_params(rng, aconfig, len(vocab))
    adam = AdamState(lr=config.stage1_lr)

    rows = []
    order = []
    for step in range(1, config.stage1_steps + 1):
        if not order:
            order = [int(i) for i in rng.permutation(len(train))]
        utt = train[order.pop()]
        alpha = anneal_alpha(step, schedule)
        with tape() as tp:
            y = encode_phonemes(utt.phonemes, store, vocab, aconfig)
            y_up = upsample(y, utt.durations)
            latent = reference_encode(utt.mel.frames, store, aconfig)
            noise = constant(rng.standard_normal((1, aconfig.latent_dim)).astype(np.float32))
            z = reparameterize(latent.mean, latent.log_var, noise)
            # Free-running decode.  With teacher forcing the previous ground
            # truth frame leaks the utterance-level prosody, so the decoder
            # never needs z and the posterior goes uninformative.
            x_hat = decode(y_up, z, store, aconfig)
            loss, recon, kl = elbo_loss(x_hat, utt.mel.frames, latent, alpha)
            if not np.isfinite(loss.data):
                raise TrainingDivergenceError(
                    f"stage1 loss non-finite at step {step} on {utt.id}"
                )
            tp.backward(loss)
        adam_step(store, adam)
        rows.append([step, f"{recon:.6f}", f"{kl:.6f}", f"{alpha:.6f}"])

    out = Path(config.out_dir)
    _write_csv(out / "stage1_loss.csv", ["step", "recon", "kl", "alpha"], rows)
    ckpt_dir = out / "stage1"
    extra = {
        "acoustic_config": aconfig.to_dict(),
        "anneal": {"alpha_max": schedule.alpha_max, "ramp_start": schedule.ramp_start,
                   "ramp_end": schedule.ramp_end},
        "phoneme_inventory": list(corpus_config.phoneme_inventory),
        "train_ids": [u.id for u in train],
        "heldout_ids": [u.id for u in heldout],
    }
    ckpt_hash = save_checkpoint(ckpt_dir, "stage1", config.stage1_steps, store,
                                config.to_dict(), parent_hash=None, extra=extra)
    tail = min(50, len(rows))
    final_recon = float(np.mean([float(r[1]) for r in rows[-tail:]]))
    final_kl = float(np.mean([float(r[2]) for r in rows[-tail:]]))
    return {
        "checkpoint_dir": str(ckpt_dir),
        "checkpoint_hash": ckpt_hash,
        "csv": str(out / "stage1_loss.csv"),
        "steps": config.stage1_steps,
        "first_recon": float(rows[0][1]),
        "final_recon": final_recon,
        "final_kl": final_kl,
    }


def train_sampler(config: RunConfig, stage1_dir, variant: str | None = None) -> dict:
    """KL-matching a text sampler to frozen reference-encoder posteriors."""
    variant = variant or config.sampler_variant
    stage1 = load_checkpoint(stage1_dir, expect_stage="stage1")
    aconfig = AcousticConfig.from_dict(stage1.extra["acoustic_config"])
    utts, _ = _load_validated(config)
    train = _select_by_ids(utts, stage1.extra["train_ids"], "train")
    heldout = _select_by_ids(utts, stage1.extra["heldout_ids"], "held-out")

    # message passes from the train-split diameter distribution, frozen here
    passes = 1
    label_vocab = None
    if variant in ("graph", "combined"):
        graphs = [tree_to_graph(strip_words(parse_penn(u.parse))) for u in train]
        label_vocab = LabelVocab([lab for g in graphs for lab in g.labels])
        passes = message_pass_count([graph_diameter(g) for g in graphs])
    sconfig = config.sampler_config(variant, passes)

    inputs_train = [prepare_sampler_input(u, sconfig) for u in train]
    inputs_held = [prepare_sampler_input(u, sconfig) for u in heldout]

    # targets are fixed for the whole stage because {phi} is frozen
    ref_before = {n: stage1.store[n].data.copy()
                  for n in stage1.store.namespace("ref/")}
    targets_train = [detached_latent(reference_encode(u.mel.frames, stage1.store, aconfig))
                     for u in train]
    targets_held = [detached_latent(reference_encode(u.mel.frames, stage1.store, aconfig))
                    for u in heldout]

    rng = np.random.default_rng([config.seed, 2])
    store = init_sampler_params(rng, sconfig,
                                len(label_vocab) if label_vocab else 0)
    adam = AdamState(lr=config.sampler_lr)
    names = store.names()

    def heldout_kl() -> float:
        vals = []
        for inp, target in zip(inputs_held, targets_held):
            pred = sampler_forward(store, sconfig, label_vocab,
                                   embeddings=inp.embeddings, graph=inp.graph)
            vals.append(kl_divergence(pred, target, reverse=sconfig.reverse_kl).item())
        return float(np.mean(vals))

    prior_kl = _prior_heldout_kl(targets_held, reverse=sconfig.reverse_kl)
    rows = []
    for epoch in range(1, config.sampler_epochs + 1):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(train), config.batch_size):
            chunk = [int(i) for i in order[start:start + config.batch_size]]
            loss = sampler_kl_step([inputs_train[i] for i in chunk],
                                   [targets_train[i] for i in chunk],
                                   store, sconfig, label_vocab)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"sampler loss non-finite in epoch {epoch}"
                )
            adam_step(store, adam, names=names)
            losses.append(loss)
        rows.append([epoch, f"{float(np.mean(losses)):.6f}", f"{heldout_kl():.6f}"])

    # frozen contract: stage-1 parameters must be untouched
    for n, before in ref_before.items():
        if not np.array_equal(before, stage1.store[n].data):
            raise PipelineError(f"frozen reference-encoder tensor {n} changed")

    out = Path(config.out_dir)
    csv_path = out / f"sampler_{variant}_loss.csv"
    _write_csv(csv_path, ["epoch", "train_kl", "heldout_kl"], rows)
    ckpt_dir = out / f"sampler-{variant}"
    extra = {
        "variant": variant,
        "passes": passes,
        "sampler_config": sconfig.to_dict(),
        "label_vocab": label_vocab.to_list() if label_vocab else [],
        "train_ids": stage1.extra["train_ids"],
        "heldout_ids": stage1.extra["heldout_ids"],
        "prior_heldout_kl": prior_kl,
        "final_heldout_kl": float(rows[-1][2]),
    }
    ckpt_hash = save_checkpoint(ckpt_dir, "sampler", config.sampler_epochs, store,
                                config.to_dict(), parent_hash=stage1.hash, extra=extra)
    return {
        "checkpoint_dir": str(ckpt_dir),
        "checkpoint_hash": ckpt_hash,
        "csv": str(csv_path),
        "variant": variant,
        "passes": passes,
        "epochs": config.sampler_epochs,
        "first_heldout_kl": float(rows[0][2]),
        "final_heldout_kl": float(rows[-1][2]),
        "prior_heldout_kl": prior_kl,
    }


def _prior_heldout_kl(targets, reverse: bool) -> float:
    """Held-out KL of the constant predictor N(0, I); the bar a useful
    sampler must beat."""
    from ..diffcore import Tensor

    vals = []
    for target in targets:
        d = target.dim
        prior = GaussianLatent(mean=Tensor(np.zeros((1, d), dtype=np.float32)),
                               log_var=Tensor(np.zeros((1, d), dtype=np.float32)))
        vals.append(kl_divergence(prior, target, reverse=reverse).item())
    return float(np.mean(vals))


def train_duration(config: RunConfig, sampler_dir) -> dict:
    """Group-normalized duration regression, optionally conditioned on fresh
    samples from the frozen sampler's predicted distribution."""
    sampler = load_checkpoint(sampler_dir, expect_stage="sampler")
    from ..samplers import SamplerConfig

    sconfig = SamplerConfig.from_dict(sampler.extra["sampler_config"])
    label_vocab = (LabelVocab.from_list(sampler.extra["label_vocab"])
                   if sampler.extra["label_vocab"] else None)
    utts, corpus_config = _load_validated(config)
    train = _select_by_ids(utts, sampler.extra["train_ids"], "train")

    stats = compute_group_stats(train, default_grouping(corpus_config.phoneme_inventory))
    dconfig = config.duration_config()
    vocab = PhonemeVocab(corpus_config.phoneme_inventory)
    rng = np.random.default_rng([config.seed, 3])
    store = init_duration_params(rng, dconfig, len(vocab))
    adam = AdamState(lr=config.dur_lr)

    # the sampler is frozen: predicted distributions are fixed per utterance
    sampler_before = {n: t.data.copy() for n, t in sampler.store.items()}
    predicted = None
    if dconfig.z_dim > 0:
        predicted = []
        for u in train:
            inp = prepare_sampler_input(u, sconfig)
            lat = sampler_forward(sampler.store, sconfig, label_vocab,
                                  embeddings=inp.embeddings, graph=inp.graph)
            predicted.append((lat.mean.data.copy(),
                              np.exp(0.5 * lat.log_var.data).copy()))

    rows = []
    for epoch in range(1, config.dur_epochs + 1):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(train), config.batch_size):
            chunk = [int(i) for i in order[start:start + config.batch_size]]
            items = []
            for i in chunk:
                u = train[i]
                z = None
                if predicted is not None:
                    mu, sd = predicted[i]
                    z = (mu + sd * rng.standard_normal(mu.shape)).astype(np.float32)
                items.append((u.phonemes, u.durations, z))
            loss = duration_train_step(items, store, vocab, dconfig, stats)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"duration loss non-finite in epoch {epoch}"
                )
            adam_step(store, adam)
            losses.append(loss)
        rows.append([epoch, f"{float(np.mean(losses)):.6f}"])

    for n, before in sampler_before.items():
        if not np.array_equal(before, sampler.store[n].data):
            raise PipelineError(f"frozen sampler tensor {n} changed")

    out = Path(config.out_dir)
    csv_path = out / "duration_loss.csv"
    _write_csv(csv_path, ["epoch", "loss"], rows)
    ckpt_dir = out / "duration"
    extra = {
        "dur_config": dconfig.to_dict(),
        "group_stats": stats.to_dict(),
        "variant": sampler.extra["variant"],
        "train_ids": sampler.extra["train_ids"],
        "heldout_ids": sampler.extra["heldout_ids"],
    }
    ckpt_hash = save_checkpoint(ckpt_dir, "duration", config.dur_epochs, store,
                                config.to_dict(), parent_hash=sampler.hash, extra=extra)
    return {
        "checkpoint_dir": str(ckpt_dir),
        "checkpoint_hash": ckpt_hash,
        "csv": str(csv_path),
        "epochs": config.dur_epochs,
        "first_loss": float(rows[0][1]),
        "final_loss": float(rows[-1][1]),
        "prosody_conditioned": dconfig.z_dim > 0,
    }
