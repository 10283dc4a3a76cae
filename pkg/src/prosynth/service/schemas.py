"""Request/response models for the HTTP service.

RunConfigModel mirrors pipeline.RunConfig field for field (same names, same
defaults) so a JSON config file and a request body are interchangeable; a
test pins the two against each other.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..pipeline import RunConfig


class RunConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    corpus_dir: str = ""
    out_dir: str = ""
    seed: int = 1234
    train_fraction: float = 0.9

    mel_bins: int = 16
    latent_dim: int = 8
    phoneme_embed: int = 16
    encoder_hidden: int = 16
    ref_channels: int = 16
    ref_hidden: int = 16
    decoder_hidden: int = 32

    stage1_steps: int = 2000
    stage1_lr: float = 1e-3
    alpha_max: float = 1e-4
    ramp_start: int = 200
    ramp_end: int = 1200

    embedding_dim: int = 16
    sampler_variant: str = "semantic"
    semantic_hidden: int = 16
    graph_hidden: int = 16
    graph_lstm_hidden: int = 16
    sampler_epochs: int = 30
    sampler_lr: float = 2e-3
    reverse_kl: bool = False

    dur_embed: int = 16
    dur_hidden: int = 16
    dur_epochs: int = 30
    dur_lr: float = 2e-3
    dur_use_prosody: bool = True
    dur_squared_loss: bool = False

    batch_size: int = 8

    def to_run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.model_dump())


class SynthCorpusRequest(BaseModel):
    out_dir: str
    size: int
    seed: int = 0


class SynthCorpusResponse(BaseModel):
    out_dir: str
    size: int
    seed: int
    mel_bins: int
    embedding_dim: int


class TrainStage1Request(BaseModel):
    config: RunConfigModel


class TrainStage1Response(BaseModel):
    checkpoint_dir: str
    checkpoint_hash: str
    csv: str
    steps: int
    first_recon: float
    final_recon: float
    final_kl: float


class TrainSamplerRequest(BaseModel):
    config: RunConfigModel
    stage1_dir: str
    variant: str | None = None


class TrainSamplerResponse(BaseModel):
    checkpoint_dir: str
    checkpoint_hash: str
    csv: str
    variant: str
    passes: int
    epochs: int
    first_heldout_kl: float
    final_heldout_kl: float
    prior_heldout_kl: float


class TrainDurationRequest(BaseModel):
    config: RunConfigModel
    sampler_dir: str


class TrainDurationResponse(BaseModel):
    checkpoint_dir: str
    checkpoint_hash: str
    csv: str
    epochs: int
    first_loss: float
    final_loss: float
    prosody_conditioned: bool


class InferRequest(BaseModel):
    stage1_dir: str
    sampler_dir: str
    duration_dir: str
    corpus_dir: str
    utt_id: str
    out_path: str
    temperature: float = 0.0
    use_oracle_z: bool = False
    seed: int = 0


class InferResponse(BaseModel):
    mel_path: str
    sidecar_path: str
    frames: int
    durations: list[int]
    condition: str


class EvalRequest(BaseModel):
    stage1_dir: str
    sampler_dir: str
    duration_dir: str
    corpus_dir: str
    out_dir: str


class ConditionMetrics(BaseModel):
    teacher_dur_mel_mse: float
    aligned_mel_mse: float
    duration_rmse: float
    heldout_kl: float


class EvalResponse(BaseModel):
    conditions: dict[str, ConditionMetrics]
    csv: str
    dat: str
    heldout_size: int


class ErrorBody(BaseModel):
    error_type: str  # "validation" or "divergence"
    message: str
