from .checkpoint import (
    Checkpoint,
    compute_checkpoint_hash,
    load_checkpoint,
    save_checkpoint,
    verify_parent,
)
from .config import PipelineError, RunConfig
from .evaluation import aligned_mel_mse, mel_mse, run_eval
from .inference import load_chain, run_inference
from .training import train_duration, train_sampler, train_stage1

__all__ = [
    "Checkpoint", "compute_checkpoint_hash", "load_checkpoint",
    "save_checkpoint", "verify_parent",
    "PipelineError", "RunConfig",
    "train_stage1", "train_sampler", "train_duration",
    "run_inference", "load_chain",
    "run_eval", "mel_mse", "aligned_mel_mse",
]
