"""Corpus round-trips, loader validation, splits, and the planted
prosody signal in the synthetic generator."""

import json
from pathlib import Path

import numpy as np
import pytest

from prosynth.corpus import (
    AnnotatedUtterance,
    CorpusConfig,
    CorpusError,
    EmbeddingSeq,
    MelSpectrogram,
    base_duration,
    fallback_embeddings,
    load_corpus,
    split_corpus,
    synth_corpus,
)
from prosynth.corpus.loader import write_corpus
from prosynth.corpus.synthetic import (
    PAUSE_SHORT,
    PAUSE_SIL,
    phoneme_inventory,
    scaled_durations,
    sentence_phonemes,
)
from prosynth.syntax import parse_penn, strip_words, tree_to_graph


def _tiny_config():
    return CorpusConfig(mel_bins=4, embedding_dim=4,
                        phoneme_inventory=["a", "b", "sil"])


def _utt(uid="u0", durations=(2, 3), phonemes=("a", "b"), bins=4):
    total = sum(durations)
    mel = MelSpectrogram(frames=np.arange(total * bins, dtype=np.float32).reshape(total, bins),
                         hop=200, window=800, sample_rate=16000)
    return AnnotatedUtterance(
        id=uid, text="a b.", phonemes=list(phonemes), durations=list(durations),
        mel=mel, parse="(S (A a) (B b))",
        embeddings=EmbeddingSeq(vectors=np.ones((2, 4), dtype=np.float32),
                                wordpieces=["a", "b"]),
    )


def test_write_load_single_utterance(tmp_path):
    write_corpus(tmp_path, [_utt()], _tiny_config())
    utts, config = load_corpus(tmp_path)
    assert len(utts) == 1
    assert utts[0].id == "u0"
    assert config.mel_bins == 4


def test_roundtrip_tensors_bit_exact(tmp_path):
    original = _utt()
    write_corpus(tmp_path, [original], _tiny_config())
    (loaded,), _ = load_corpus(tmp_path)
    assert np.array_equal(loaded.mel.frames, original.mel.frames)
    assert loaded.mel.frames.dtype == np.float32
    assert np.array_equal(loaded.embeddings.vectors, original.embeddings.vectors)
    assert loaded.embeddings.wordpieces == original.embeddings.wordpieces
    assert loaded.durations == original.durations
    assert loaded.parse == original.parse


def test_duration_sum_mismatch_names_offender(tmp_path):
    bad = _utt(uid="broken", durations=(2, 2))  # mel has 5 frames
    bad.mel = MelSpectrogram(frames=np.zeros((5, 4), dtype=np.float32),
                             hop=200, window=800, sample_rate=16000)
    write_corpus(tmp_path, [bad], _tiny_config())
    with pytest.raises(CorpusError, match="broken"):
        load_corpus(tmp_path)


def test_unknown_phoneme_names_offender(tmp_path):
    bad = _utt(uid="odd", phonemes=("a", "zz"))
    write_corpus(tmp_path, [bad], _tiny_config())
    with pytest.raises(CorpusError, match="odd"):
        load_corpus(tmp_path)


def test_missing_mel_file_names_offender(tmp_path):
    write_corpus(tmp_path, [_utt(uid="gone")], _tiny_config())
    (tmp_path / "mels" / "gone.ktns").unlink()
    with pytest.raises(CorpusError, match="gone"):
        load_corpus(tmp_path)


def test_missing_config_rejected(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


# ---------------------------------------------------------------------------
# synthetic generator

@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    synth_corpus(d, 200, seed=7)
    return d


def test_synth_corpus_loads_and_validates(synth_dir):
    utts, config = load_corpus(synth_dir)
    assert len(utts) == 200
    for u in utts:
        u.validate(config)  # loader already did; belt and braces
        assert u.embeddings is not None
        assert u.embeddings.vectors.shape[1] == config.embedding_dim
        # parse strings are consumable by the syntax module end to end
        graph = tree_to_graph(strip_words(parse_penn(u.parse)))
        assert graph.num_edges == graph.num_nodes - 1


def test_synth_corpus_same_seed_bit_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    synth_corpus(a, 12, seed=3)
    synth_corpus(b, 12, seed=3)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_synth_corpus_different_seed_differs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    synth_corpus(a, 12, seed=3)
    synth_corpus(b, 12, seed=4)
    assert (a / "meta.jsonl").read_bytes() != (b / "meta.jsonl").read_bytes()


def test_zero_prosody_scalar_keeps_base_durations():
    phonemes = sentence_phonemes(["lumo", "garu"])
    assert scaled_durations(phonemes, 0.0) == [base_duration(p) for p in phonemes]


def test_sentence_phonemes_structure():
    seq = sentence_phonemes(["da", "lumo"])
    assert seq[0] == PAUSE_SIL and seq[-1] == PAUSE_SIL
    assert seq.count(PAUSE_SHORT) == 1
    inv = set(phoneme_inventory())
    assert all(p in inv for p in seq)


def test_base_duration_ranges():
    assert base_duration(PAUSE_SIL) == 12
    assert base_duration(PAUSE_SHORT) == 8
    for p in phoneme_inventory():
        if p not in (PAUSE_SIL, PAUSE_SHORT):
            assert 3 <= base_duration(p) <= 6


def test_planted_signal_correlation(synth_dir):
    utts, _ = load_corpus(synth_dir)
    hidden = json.loads((Path(synth_dir) / "hidden_prosody.json").read_text())
    svals, scales = [], []
    for u in utts:
        ratios = [d / base_duration(p) for p, d in zip(u.phonemes, u.durations)]
        svals.append(hidden[u.id])
        scales.append(float(np.mean(ratios)))
    corr = float(np.corrcoef(svals, scales)[0, 1])
    assert corr > 0.8, f"planted prosody signal too weak: corr={corr:.3f}"


def test_synth_mel_energy_tracks_scalar(synth_dir):
    # upper-band mean energy correlates with s (energy modulation is real)
    utts, config = load_corpus(synth_dir)
    hidden = json.loads((Path(synth_dir) / "hidden_prosody.json").read_text())
    lo = config.mel_bins // 2
    svals = [hidden[u.id] for u in utts]
    upper = [float(np.mean(u.mel.frames[:, lo:])) for u in utts]
    assert float(np.corrcoef(svals, upper)[0, 1]) > 0.5


def test_synth_size_validation(tmp_path):
    with pytest.raises(ValueError):
        synth_corpus(tmp_path, 0, seed=1)


# ---------------------------------------------------------------------------
# fallback embeddings

def test_fallback_embeddings_deterministic():
    a = fallback_embeddings("da lumo garu.", 16)
    b = fallback_embeddings("da lumo garu.", 16)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.wordpieces == ["da", "lumo", "garu", "."]


def test_fallback_embeddings_contextual():
    # the same piece in different contexts gets a different row
    a = fallback_embeddings("lumo garu.", 16)
    b = fallback_embeddings("garu lumo.", 16)
    row_a = a.vectors[a.wordpieces.index("lumo")]
    row_b = b.vectors[b.wordpieces.index("lumo")]
    cos = float(np.dot(row_a, row_b) /
                (np.linalg.norm(row_a) * np.linalg.norm(row_b)))
    assert cos < 1.0 - 1e-6


def test_fallback_embeddings_validation():
    with pytest.raises(ValueError):
        fallback_embeddings("da lumo", 15)  # odd dim
    with pytest.raises(ValueError):
        fallback_embeddings("   ", 16)  # no pieces


# ---------------------------------------------------------------------------
# splits

def _numbered(n):
    return [_utt(uid=f"u{i:02d}") for i in range(n)]


def test_split_sizes():
    train, held = split_corpus(_numbered(10), 0.8, seed=0)
    assert len(train) == 8 and len(held) == 2


def test_split_partition():
    utts = _numbered(10)
    train, held = split_corpus(utts, 0.7, seed=5)
    ids = {u.id for u in utts}
    assert {u.id for u in train} | {u.id for u in held} == ids
    assert {u.id for u in train} & {u.id for u in held} == set()


def test_split_deterministic():
    utts = _numbered(20)
    a = split_corpus(utts, 0.75, seed=9)
    b = split_corpus(utts, 0.75, seed=9)
    assert [u.id for u in a[0]] == [u.id for u in b[0]]
    c = split_corpus(utts, 0.75, seed=10)
    assert [u.id for u in a[0]] != [u.id for u in c[0]]


def test_split_degenerate_rejected():
    with pytest.raises(CorpusError):
        split_corpus(_numbered(3), 0.1, seed=0)  # floors to an empty train side
    with pytest.raises(CorpusError):
        split_corpus(_numbered(5), 1.5, seed=0)
    with pytest.raises(CorpusError):
        split_corpus(_numbered(5), 0.0, seed=0)
