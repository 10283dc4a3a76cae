"""Run configuration shared by all pipeline stages.

One RunConfig drives the whole pipeline; it is serialized verbatim into every
checkpoint manifest so a checkpoint is self-describing and later stages can
validate they were launched against the same settings.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from ..acoustic import AcousticConfig, AnnealSchedule
from ..corpus import CorpusConfig
from ..durmodel import DurModelConfig
from ..samplers import VARIANTS, SamplerConfig


class PipelineError(ValueError):
    """Configuration, wiring, or checkpoint-lineage problem (exit code 2)."""


@dataclass
class RunConfig:
    corpus_dir: str = ""
    out_dir: str = ""
    seed: int = 1234
    train_fraction: float = 0.9

    # acoustic model
    mel_bins: int = 16
    latent_dim: int = 8
    phoneme_embed: int = 16
    encoder_hidden: int = 16
    ref_channels: int = 16
    ref_hidden: int = 16
    decoder_hidden: int = 32

    # stage 1.  alpha_max is deliberately small: the latent is sentence-level
    # while the reconstruction is per-frame, so even modest KL pressure will
    # collapse the posterior on short synthetic corpora.
    stage1_steps: int = 2000
    stage1_lr: float = 1e-3
    alpha_max: float = 1e-4
    ramp_start: int = 200
    ramp_end: int = 1200

    # stage 2 (samplers)
    embedding_dim: int = 16
    sampler_variant: str = "semantic"
    semantic_hidden: int = 16
    graph_hidden: int = 16
    graph_lstm_hidden: int = 16
    sampler_epochs: int = 30
    sampler_lr: float = 2e-3
    reverse_kl: bool = False

    # stage 3 (durations)
    dur_embed: int = 16
    dur_hidden: int = 16
    dur_epochs: int = 30
    dur_lr: float = 2e-3
    dur_use_prosody: bool = True
    dur_squared_loss: bool = False

    batch_size: int = 8  # stages 2 and 3; stage 1 steps are single-utterance

    def __post_init__(self):
        if self.sampler_variant not in VARIANTS:
            raise PipelineError(f"unknown sampler variant {self.sampler_variant!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise PipelineError(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        if self.batch_size < 1:
            raise PipelineError(f"batch size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise PipelineError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise PipelineError(f"config file not found: {p}")
        try:
            return cls.from_dict(json.loads(p.read_text()))
        except json.JSONDecodeError as e:
            raise PipelineError(f"config {p} is not valid JSON: {e}") from e
        except TypeError as e:
            raise PipelineError(f"config {p}: {e}") from e

    def validate_against_corpus(self, corpus_config: CorpusConfig):
        if self.mel_bins != corpus_config.mel_bins:
            raise PipelineError(
                f"config mel_bins {self.mel_bins} != corpus {corpus_config.mel_bins}"
            )
        if self.embedding_dim != corpus_config.embedding_dim:
            raise PipelineError(
                f"config embedding_dim {self.embedding_dim} != corpus "
                f"{corpus_config.embedding_dim}"
            )
        if not corpus_config.phoneme_inventory:
            raise PipelineError("corpus declares an empty phoneme inventory")

    # per-module views -----------------------------------------------------

    def acoustic_config(self) -> AcousticConfig:
        return AcousticConfig(
            mel_bins=self.mel_bins, latent_dim=self.latent_dim,
            phoneme_embed=self.phoneme_embed, encoder_hidden=self.encoder_hidden,
            ref_channels=self.ref_channels, ref_hidden=self.ref_hidden,
            decoder_hidden=self.decoder_hidden,
        )

    def anneal_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(alpha_max=self.alpha_max, ramp_start=self.ramp_start,
                              ramp_end=self.ramp_end)

    def sampler_config(self, variant: str, passes: int) -> SamplerConfig:
        return SamplerConfig(
            variant=variant, latent_dim=self.latent_dim,
            embedding_dim=self.embedding_dim, semantic_hidden=self.semantic_hidden,
            graph_hidden=self.graph_hidden, graph_lstm_hidden=self.graph_lstm_hidden,
            passes=passes, reverse_kl=self.reverse_kl,
        )

    def duration_config(self) -> DurModelConfig:
        return DurModelConfig(
            phoneme_embed=self.dur_embed, hidden=self.dur_hidden,
            z_dim=self.latent_dim if self.dur_use_prosody else 0,
            squared_loss=self.dur_squared_loss,
        )
