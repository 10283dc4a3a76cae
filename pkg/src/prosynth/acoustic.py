"""Sequence-to-sequence mel predictor with a sentence-level variational
prosody bottleneck.

Text side: phoneme embeddings -> biLSTM encodings Y, replicated per frame by
ground-truth or predicted durations.  Prosody side: a reference encoder maps
the target mel to the parameters of a diagonal Gaussian posterior (mu, logvar)
whose sample z conditions every decoder step.  Training minimizes
reconstruction MSE + alpha * KL(posterior || N(0, I)) with alpha annealed
linearly from zero so the posterior is used before it is penalized.

Parameter namespaces: `enc/` and `dec/` hold the synthesis path, `ref/` holds
the reference encoder; later training stages freeze the first two and treat
`ref/` as a fixed target distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import (
    ParamStore,
    ShapeError,
    Tensor,
    add,
    bilstm_encode,
    bilstm_init,
    concat,
    constant,
    exp,
    gather_rows,
    linear_forward,
    lstm_cell,
    lstm_init,
    lstm_last,
    matmul,
    mean_all,
    mul,
    narrow,
    reshape,
    sub,
    sum_all,
    tanh,
    uniform_init,
    zeros,
)
from .diffcore.layers import EmptySequenceError, embedding_lookup


class AcousticError(ValueError):
    pass


@dataclass
class GaussianLatent:
    """Diagonal Gaussian over the prosody latent: mean and log-variance,
    both [1, D] rows."""

    mean: Tensor
    log_var: Tensor

    @property
    def dim(self) -> int:
        return self.mean.dims[1]


@dataclass
class AnnealSchedule:
    alpha_max: float = 0.01
    ramp_start: int = 200
    ramp_end: int = 1000

    def __post_init__(self):
        if not 0 <= self.ramp_start <= self.ramp_end:
            raise AcousticError(
                f"anneal ramp must satisfy 0 <= start <= end, got "
                f"[{self.ramp_start}, {self.ramp_end}]"
            )
        if self.alpha_max <= 0:
            raise AcousticError(f"alpha_max must be positive, got {self.alpha_max}")


@dataclass
class AcousticConfig:
    mel_bins: int = 16
    latent_dim: int = 8
    phoneme_embed: int = 16
    encoder_hidden: int = 16
    ref_channels: int = 16
    ref_hidden: int = 16
    decoder_hidden: int = 32

    @property
    def encoding_dim(self) -> int:
        return 2 * self.encoder_hidden  # biLSTM output width

    def to_dict(self) -> dict:
        return {
            "mel_bins": self.mel_bins,
            "latent_dim": self.latent_dim,
            "phoneme_embed": self.phoneme_embed,
            "encoder_hidden": self.encoder_hidden,
            "ref_channels": self.ref_channels,
            "ref_hidden": self.ref_hidden,
            "decoder_hidden": self.decoder_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcousticConfig":
        return cls(**{k: int(v) for k, v in d.items()})


class PhonemeVocab:
    """Fixed phoneme inventory; unknown tokens are an error, never UNK-mapped,
    because durations and mels are aligned per token."""

    def __init__(self, inventory: list[str]):
        if not inventory:
            raise AcousticError("empty phoneme inventory")
        self._id = {}
        for tok in inventory:
            if tok in self._id:
                raise AcousticError(f"duplicate phoneme {tok!r} in inventory")
            self._id[tok] = len(self._id)

    def __len__(self) -> int:
        return len(self._id)

    def ids(self, tokens: list[str]) -> list[int]:
        try:
            return [self._id[t] for t in tokens]
        except KeyError as e:
            raise AcousticError(f"unknown phoneme {e.args[0]!r}") from None


SYNTH_NAMESPACES = ("enc/", "dec/")  # {theta}
REF_NAMESPACE = "ref/"  # {phi}

_CONV_KERNEL = 3
_CONV_STRIDE = 2
_REF_CONV_LAYERS = 3


def init_acoustic_params(rng: np.random.Generator, config: AcousticConfig,
                         vocab_size: int, store: ParamStore | None = None) -> ParamStore:
    if store is None:
        store = ParamStore()
    c = config
    store.add("enc/embed", uniform_init(rng, (vocab_size, c.phoneme_embed), 0.1))
    bilstm_init(rng, c.phoneme_embed, c.encoder_hidden, store, "enc/lstm")

    in_ch = c.mel_bins
    for layer in range(_REF_CONV_LAYERS):
        scale = 1.0 / np.sqrt(_CONV_KERNEL * in_ch)
        store.add(f"ref/conv{layer}/w",
                  uniform_init(rng, (_CONV_KERNEL * in_ch, c.ref_channels), scale))
        store.add(f"ref/conv{layer}/b", np.zeros(c.ref_channels))
        in_ch = c.ref_channels
    lstm_init(rng, c.ref_channels, c.ref_hidden, store, "ref/lstm")
    proj_scale = 1.0 / np.sqrt(c.ref_hidden)
    store.add("ref/mu/w", uniform_init(rng, (c.ref_hidden, c.latent_dim), proj_scale))
    store.add("ref/mu/b", np.zeros(c.latent_dim))
    store.add("ref/logvar/w", uniform_init(rng, (c.ref_hidden, c.latent_dim), proj_scale))
    # Start the posterior narrow (sigma ~ 0.37).  At sigma = 1 the latent is
    # pure noise to the decoder, which then never learns to read it, which in
    # turn removes the reconstruction pressure that would widen the means.
    store.add("ref/logvar/b", np.full(c.latent_dim, -2.0))

    dec_in = c.encoding_dim + c.latent_dim + c.mel_bins
    lstm_init(rng, dec_in, c.decoder_hidden, store, "dec/lstm")
    out_scale = 1.0 / np.sqrt(c.decoder_hidden)
    store.add("dec/out/w", uniform_init(rng, (c.decoder_hidden, c.mel_bins), out_scale))
    store.add("dec/out/b", np.zeros(c.mel_bins))
    return store


def encode_phonemes(tokens: list[str], store: ParamStore, vocab: PhonemeVocab,
                    config: AcousticConfig) -> Tensor:
    """Phoneme token sequence -> encodings Y, one [2H] row per token."""
    if not tokens:
        raise EmptySequenceError("encode_phonemes: empty phoneme sequence")
    emb = embedding_lookup(store["enc/embed"], vocab.ids(tokens))
    return bilstm_encode(emb, store, "enc/lstm", config.encoder_hidden)


def upsample(y: Tensor, durations: list[int]) -> Tensor:
    """Repeat encoding row i durations[i] times; output has sum(durations) rows."""
    if len(durations) != y.dims[0]:
        raise ShapeError(
            f"upsample: {len(durations)} durations for {y.dims[0]} encodings"
        )
    if any(d < 0 for d in durations):
        raise AcousticError("upsample: negative duration")
    if sum(durations) == 0:
        raise AcousticError("upsample: total duration is zero")
    ids = np.repeat(np.arange(len(durations)), durations)
    return gather_rows(y, ids)


def _strided_conv(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Width-3 stride-2 temporal convolution with edge replication, so only
    real frames ever enter the receptive field.  [T, C_in] -> [ceil(T/2), C_out]."""
    t_in = x.dims[0]
    centers = np.arange(0, t_in, _CONV_STRIDE)
    taps = centers[:, None] + np.array([-1, 0, 1])
    ids = np.clip(taps, 0, t_in - 1).reshape(-1)
    patches = reshape(gather_rows(x, ids), (len(centers), _CONV_KERNEL * x.dims[1]))
    return tanh(add(matmul(patches, w), b))


def reference_encode(mel_frames: np.ndarray, store: ParamStore,
                     config: AcousticConfig) -> GaussianLatent:
    """Target mel [T, B] -> posterior (mu, logvar), each [1, D]."""
    if mel_frames.ndim != 2 or mel_frames.shape[1] != config.mel_bins:
        raise ShapeError(
            f"reference_encode: expected [T, {config.mel_bins}], got {mel_frames.shape}"
        )
    x = constant(mel_frames)
    for layer in range(_REF_CONV_LAYERS):
        x = _strided_conv(x, store[f"ref/conv{layer}/w"], store[f"ref/conv{layer}/b"])
    h = lstm_last(x, store, "ref/lstm", config.ref_hidden)
    mu = linear_forward(h, store["ref/mu/w"], store["ref/mu/b"])
    logvar = linear_forward(h, store["ref/logvar/w"], store["ref/logvar/b"])
    return GaussianLatent(mean=mu, log_var=logvar)


def decode(y_up: Tensor, z: Tensor, store: ParamStore, config: AcousticConfig,
           teacher: np.ndarray | None = None) -> Tensor:
    """Autoregressive single-frame decoder.

    Step input is [y_up[t] || z || previous frame]; the previous frame is the
    teacher row during training, the model's own output when free-running.
    """
    t_total = y_up.dims[0]
    if z.dims != (1, config.latent_dim):
        raise ShapeError(f"decode: z must be [1, {config.latent_dim}], got {z.dims}")
    if y_up.dims[1] != config.encoding_dim:
        raise ShapeError(
            f"decode: encodings are {y_up.dims[1]}-wide, config says {config.encoding_dim}"
        )
    if teacher is not None and teacher.shape != (t_total, config.mel_bins):
        raise ShapeError(
            f"decode: teacher shape {teacher.shape}, expected {(t_total, config.mel_bins)}"
        )
    wx, wh, b = store["dec/lstm/wx"], store["dec/lstm/wh"], store["dec/lstm/b"]
    out_w, out_b = store["dec/out/w"], store["dec/out/b"]
    h = zeros((1, config.decoder_hidden))
    c = zeros((1, config.decoder_hidden))
    prev = zeros((1, config.mel_bins))
    frames = []
    for t in range(t_total):
        step_in = concat([narrow(y_up, 0, t, 1), z, prev], axis=1)
        h, c = lstm_cell(step_in, h, c, wx, wh, b)
        frame = linear_forward(h, out_w, out_b)
        frames.append(frame)
        prev = constant(teacher[t:t + 1]) if teacher is not None else frame
    return concat(frames, axis=0)


def kl_to_prior(latent: GaussianLatent) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum(exp(logvar) + mu^2 - logvar - 1)."""
    lv, mu = latent.log_var, latent.mean
    terms = sub(sub(add(exp(lv), mul(mu, mu)), lv), constant(1.0))
    return mul(sum_all(terms), constant(0.5))


def elbo_loss(x_hat: Tensor, x: np.ndarray, latent: GaussianLatent,
              alpha: float) -> tuple[Tensor, float, float]:
    """Returns (loss tensor, recon MSE value, KL value); loss = MSE + alpha*KL."""
    if tuple(x_hat.dims) != tuple(x.shape):
        raise ShapeError(f"elbo_loss: prediction {x_hat.dims} vs target {x.shape}")
    diff = sub(x_hat, constant(x))
    recon = mean_all(mul(diff, diff))
    kl = kl_to_prior(latent)
    loss = add(recon, mul(kl, constant(alpha)))
    return loss, float(recon.data), float(kl.data)


def anneal_alpha(step: int, schedule: AnnealSchedule) -> float:
    """0 before the ramp, linear to alpha_max across it, flat after."""
    if step < 0:
        raise AcousticError(f"negative step {step}")
    if step >= schedule.ramp_end:
        return schedule.alpha_max
    if step <= schedule.ramp_start:
        return 0.0
    span = schedule.ramp_end - schedule.ramp_start
    return schedule.alpha_max * (step - schedule.ramp_start) / span
