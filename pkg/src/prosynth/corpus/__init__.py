"""Corpus data model, loading, mel extraction and synthetic data generation."""

from .types import (
    AnnotatedUtterance,
    CorpusConfig,
    CorpusError,
    EmbeddingSeq,
    MelSpectrogram,
)
from .mel import extract_mel, mel_filterbank
from .loader import load_corpus, split_corpus
from .synthetic import synth_corpus, base_duration, fallback_embeddings

__all__ = [
    "AnnotatedUtterance", "CorpusConfig", "CorpusError", "EmbeddingSeq",
    "MelSpectrogram", "extract_mel", "mel_filterbank", "load_corpus",
    "split_corpus", "synth_corpus", "base_duration", "fallback_embeddings",
]
