"""Corpus row types and their invariants.

One AnnotatedUtterance is one training row: phonemes, per-phoneme frame
durations (ingested, never computed here), the target mel-spectrogram,
a Penn bracketed parse string, and optionally a contextual embedding
sequence.  Durations must sum exactly to the mel frame count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CorpusError(ValueError):
    pass


@dataclass
class CorpusConfig:
    mel_bins: int = 16
    embedding_dim: int = 16
    phoneme_inventory: list[str] = field(default_factory=list)
    hop: int = 200
    window: int = 800
    sample_rate: int = 16000

    def to_dict(self) -> dict:
        return {
            "mel_bins": self.mel_bins,
            "embedding_dim": self.embedding_dim,
            "phoneme_inventory": list(self.phoneme_inventory),
            "hop": self.hop,
            "window": self.window,
            "sample_rate": self.sample_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        return cls(
            mel_bins=int(d["mel_bins"]),
            embedding_dim=int(d["embedding_dim"]),
            phoneme_inventory=list(d["phoneme_inventory"]),
            hop=int(d["hop"]),
            window=int(d["window"]),
            sample_rate=int(d["sample_rate"]),
        )


@dataclass
class MelSpectrogram:
    frames: np.ndarray  # [T, B] log-mel energies
    hop: int
    window: int
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]

    def validate(self):
        if self.frames.ndim != 2 or self.num_frames < 1:
            raise CorpusError(f"mel must be a [T>=1, B] matrix, got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise CorpusError("mel contains non-finite values")


@dataclass
class EmbeddingSeq:
    vectors: np.ndarray  # [L, E]
    wordpieces: list[str]

    def validate(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise CorpusError(f"embeddings must be [L>=1, E], got {self.vectors.shape}")
        if len(self.wordpieces) != self.vectors.shape[0]:
            raise CorpusError(
                f"wordpiece count {len(self.wordpieces)} != embedding rows {self.vectors.shape[0]}"
            )


@dataclass
class AnnotatedUtterance:
    id: str
    text: str
    phonemes: list[str]
    durations: list[int]
    mel: MelSpectrogram
    parse: str  # Penn bracketed string
    embeddings: EmbeddingSeq | None = None

    def validate(self, config: CorpusConfig):
        uid = self.id
        if not self.phonemes:
            raise CorpusError(f"utterance {uid}: empty phoneme sequence")
        inventory = set(config.phoneme_inventory)
        for p in self.phonemes:
            if p not in inventory:
                raise CorpusError(f"utterance {uid}: unknown phoneme {p!r}")
        if len(self.durations) != len(self.phonemes):
            raise CorpusError(
                f"utterance {uid}: {len(self.durations)} durations for {len(self.phonemes)} phonemes"
            )
        if any(d < 0 for d in self.durations):
            raise CorpusError(f"utterance {uid}: negative duration")
        self.mel.validate()
        if self.mel.num_bins != config.mel_bins:
            raise CorpusError(
                f"utterance {uid}: mel has {self.mel.num_bins} bins, corpus declares {config.mel_bins}"
            )
        total = sum(self.durations)
        if total != self.mel.num_frames:
            raise CorpusError(
                f"utterance {uid}: durations sum to {total} but mel has {self.mel.num_frames} frames"
            )
        if self.embeddings is not None:
            self.embeddings.validate()
            if self.embeddings.vectors.shape[1] != config.embedding_dim:
                raise CorpusError(
                    f"utterance {uid}: embedding dim {self.embeddings.vectors.shape[1]} "
                    f"!= corpus config {config.embedding_dim}"
                )
