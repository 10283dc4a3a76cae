"""Synthetic corpus with a planted text-to-prosody correlation.

Sentences come from a pseudo-word grammar (S -> NP VP PUNCT with NP/PP
recursion) so parse trees are nontrivial.  Each sentence draws a hidden
prosody scalar

    s = tanh(DEPTH_COEF * parse_depth + QUESTION_COEF * question_flag
             + LENGTH_COEF * word_count / 10 + noise),   noise ~ N(0, 0.1)

and s drives the observable data: per-phoneme base durations are scaled by
(1 + 0.3 s) then rounded to >= 1 frame, and the upper half of each mel
template's bins is scaled by (1 + 0.5 s) in the linear-energy domain before
log compression.  A sidecar hidden_prosody.json records {id: s} for
diagnostics; the loader ignores it.

Embeddings are the deterministic fallback: per word-piece vectors seeded
from a hash of the piece string, contextualized by a biLSTM with fixed
random weights, so the full pipeline runs without any external language
model.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..numutil import round_half_away
from ..syntax import ParseNode, ParseTree
from .loader import write_corpus
from .mel import LOG_FLOOR
from .types import AnnotatedUtterance, CorpusConfig, EmbeddingSeq, MelSpectrogram

DEPTH_COEF = 0.3
QUESTION_COEF = 0.8
LENGTH_COEF = -1.5
NOISE_STD = 0.1
DURATION_GAIN = 0.3
ENERGY_GAIN = 0.5
FRAME_JITTER = 0.03

WORDS = {
    "DT": ["da", "tho"],
    "JJ": ["rudo", "mib", "zan"],
    "NN": ["lumo", "brak", "silfa", "torn", "pexi"],
    "VB": ["garu", "plim", "vosk", "dren"],
    "IN": ["nul", "bem"],
}

PAUSE_SIL = "sil"
PAUSE_SHORT = "sp"


def phoneme_inventory() -> list[str]:
    letters = sorted({ch for words in WORDS.values() for w in words for ch in w})
    return letters + [PAUSE_SIL, PAUSE_SHORT]


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.sha256(token.encode()).digest()[:8], "little")


def base_duration(token: str) -> int:
    """Frames per phoneme before prosody scaling."""
    if token == PAUSE_SIL:
        return 12
    if token == PAUSE_SHORT:
        return 8
    return 3 + _stable_hash(token) % 4  # 3..6


def word_to_phonemes(word: str) -> list[str]:
    return list(word)


def sentence_phonemes(words: list[str]) -> list[str]:
    seq = [PAUSE_SIL]
    for i, w in enumerate(words):
        if i > 0:
            seq.append(PAUSE_SHORT)
        seq.extend(word_to_phonemes(w))
    seq.append(PAUSE_SIL)
    return seq


# ---------------------------------------------------------------------------
# grammar

def _pick(rng: np.random.Generator, options: list[str]) -> str:
    return options[int(rng.integers(0, len(options)))]


def _gen_np(rng, depth: int) -> ParseNode:
    r = rng.random()
    if depth < 2 and r < 0.25:
        return ParseNode("NP", [_gen_np(rng, depth + 1), _gen_pp(rng, depth + 1)])
    children = [ParseNode("DT", [ParseNode("", word=_pick(rng, WORDS["DT"]))])]
    if r > 0.6:
        children.append(ParseNode("JJ", [ParseNode("", word=_pick(rng, WORDS["JJ"]))]))
    children.append(ParseNode("NN", [ParseNode("", word=_pick(rng, WORDS["NN"]))]))
    return ParseNode("NP", children)


def _gen_pp(rng, depth: int) -> ParseNode:
    return ParseNode("PP", [
        ParseNode("IN", [ParseNode("", word=_pick(rng, WORDS["IN"]))]),
        _gen_np(rng, depth + 1),
    ])


def _gen_vp(rng, depth: int) -> ParseNode:
    children = [ParseNode("VB", [ParseNode("", word=_pick(rng, WORDS["VB"]))])]
    r = rng.random()
    if r > 0.3:
        children.append(_gen_np(rng, depth + 1))
    if r > 0.75:
        children.append(_gen_pp(rng, depth + 1))
    return ParseNode("VP", children)


def generate_sentence(rng: np.random.Generator) -> tuple[ParseTree, list[str], str]:
    """Returns (full parse tree, words, terminal punctuation)."""
    punct = "?" if rng.random() < 0.35 else "."
    root = ParseNode("S", [
        _gen_np(rng, 1),
        _gen_vp(rng, 1),
        ParseNode(punct, [ParseNode("", word=punct)]),
    ])
    tree = ParseTree(root)
    words = [w for w in tree.words() if w not in (".", "?")]
    return tree, words, punct


def tree_to_penn(tree: ParseTree) -> str:
    def render(n: ParseNode) -> str:
        if n.is_word():
            return n.word
        inner = " ".join(render(c) for c in n.children)
        return f"({n.label} {inner})" if inner else f"({n.label})"

    return render(tree.root)


# ---------------------------------------------------------------------------
# fallback embeddings

_CONTEXT_SEED = 0x5EED_C0DE


def tokenize_wordpieces(text: str) -> list[str]:
    """Split on whitespace, peeling trailing punctuation into its own piece."""
    out: list[str] = []
    for token in text.split():
        stem = token
        tails: list[str] = []
        while stem and stem[-1] in ".?!,":
            tails.append(stem[-1])
            stem = stem[:-1]
        if stem:
            out.append(stem)
        out.extend(reversed(tails))
    return out


def _piece_vector(piece: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng(_stable_hash("piece:" + piece))
    return rng.standard_normal(dim)


def _fixed_bilstm_weights(dim: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(_CONTEXT_SEED)
    hidden = dim // 2
    scale = 1.0 / np.sqrt(hidden)
    w = {}
    for d in ("fwd", "bwd"):
        w[f"{d}_wx"] = rng.uniform(-scale, scale, size=(dim, 4 * hidden))
        w[f"{d}_wh"] = rng.uniform(-scale, scale, size=(hidden, 4 * hidden))
        w[f"{d}_b"] = np.zeros(4 * hidden)
    return w


def _np_lstm(seq: np.ndarray, wx, wh, b) -> np.ndarray:
    hidden = wh.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    out = np.empty((seq.shape[0], hidden))
    for t in range(seq.shape[0]):
        pre = seq[t] @ wx + h @ wh + b
        i = 1.0 / (1.0 + np.exp(-pre[:hidden]))
        f = 1.0 / (1.0 + np.exp(-pre[hidden:2 * hidden]))
        g = np.tanh(pre[2 * hidden:3 * hidden])
        o = 1.0 / (1.0 + np.exp(-pre[3 * hidden:]))
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def fallback_embeddings(text: str, dim: int) -> EmbeddingSeq:
    """Deterministic contextual word-piece embeddings with no external model.

    Same piece in different contexts gets different rows because the fixed
    biLSTM mixes the whole sequence.
    """
    if dim % 2 != 0:
        raise ValueError(f"fallback embeddings need an even dim, got {dim}")
    pieces = tokenize_wordpieces(text)
    if not pieces:
        raise ValueError(f"no word-pieces in text {text!r}")
    base = np.stack([_piece_vector(p, dim) for p in pieces])
    w = _fixed_bilstm_weights(dim)
    fwd = _np_lstm(base, w["fwd_wx"], w["fwd_wh"], w["fwd_b"])
    bwd = _np_lstm(base[::-1], w["bwd_wx"], w["bwd_wh"], w["bwd_b"])[::-1]
    vectors = np.concatenate([fwd, bwd], axis=1).astype(np.float32)
    return EmbeddingSeq(vectors=vectors, wordpieces=pieces)


# ---------------------------------------------------------------------------
# corpus assembly

def _mel_templates(inventory: list[str], bins: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {p: rng.uniform(0.1, 1.0, size=bins) for p in inventory}


def hidden_prosody(depth: int, question: bool, word_count: int, noise: float) -> float:
    return float(np.tanh(DEPTH_COEF * depth + QUESTION_COEF * float(question)
                         + LENGTH_COEF * word_count / 10.0 + noise))


def scaled_durations(phonemes: list[str], s: float) -> list[int]:
    """Base durations scaled by (1 + 0.3 s), rounded half away, floored at 1."""
    return [max(1, round_half_away(base_duration(p) * (1.0 + DURATION_GAIN * s)))
            for p in phonemes]


def render_mel(phonemes: list[str], durations: list[int], s: float,
               templates: dict[str, np.ndarray], bins: int,
               rng: np.random.Generator) -> np.ndarray:
    band_lo = bins // 2
    rows = []
    for p, d in zip(phonemes, durations):
        base = templates[p].copy()
        base[band_lo:] *= (1.0 + ENERGY_GAIN * s)
        for _ in range(d):
            jitter = 1.0 + FRAME_JITTER * rng.uniform(-1.0, 1.0, size=bins)
            rows.append(np.log(np.maximum(base * jitter, LOG_FLOOR)))
    return np.asarray(rows, dtype=np.float32)


def synth_corpus(directory, size: int, seed: int,
                 config: CorpusConfig | None = None) -> CorpusConfig:
    """Generate a corpus of `size` sentences under `directory`."""
    if size < 1:
        raise ValueError(f"corpus size must be >= 1, got {size}")
    inventory = phoneme_inventory()
    if config is None:
        config = CorpusConfig(phoneme_inventory=inventory)
    else:
        config.phoneme_inventory = inventory
    rng = np.random.default_rng(seed)
    templates = _mel_templates(inventory, config.mel_bins, rng)

    utts = []
    hidden = {}
    width = len(str(size - 1)) if size > 1 else 1
    for i in range(size):
        uid = f"utt{i:0{width}d}"
        tree, words, punct = generate_sentence(rng)
        noise = float(rng.normal(0.0, NOISE_STD))
        s = hidden_prosody(tree.depth(), punct == "?", len(words), noise)
        phonemes = sentence_phonemes(words)
        durations = scaled_durations(phonemes, s)
        mel = render_mel(phonemes, durations, s, templates, config.mel_bins, rng)
        text = " ".join(words) + punct
        utts.append(AnnotatedUtterance(
            id=uid,
            text=text,
            phonemes=phonemes,
            durations=durations,
            mel=MelSpectrogram(frames=mel, hop=config.hop, window=config.window,
                               sample_rate=config.sample_rate),
            parse=tree_to_penn(tree),
            embeddings=fallback_embeddings(text, config.embedding_dim),
        ))
        hidden[uid] = s

    write_corpus(directory, utts, config)
    (Path(directory) / "hidden_prosody.json").write_text(
        json.dumps(hidden, indent=2, sort_keys=True) + "\n")
    return config
