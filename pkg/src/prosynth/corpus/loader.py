"""Corpus directory layout:

    config.json     {mel_bins, embedding_dim, phoneme_inventory, hop, window, sample_rate}
    meta.jsonl      one row per utterance:
                    {id, text, phonemes, durations, mel, parse, embeddings, wordpieces}
                    where mel/parse/embeddings are paths relative to the corpus root
    mels/*.ktns     rank-2 [T, B] tensors
    parses/*.txt    UTF-8 Penn bracketed strings
    embeds/*.ktns   rank-2 [L, E] tensors (optional per row)

Loading validates every invariant and fails with the offending utterance id.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..diffcore.ktns import read_ktns, write_ktns
from .types import AnnotatedUtterance, CorpusConfig, CorpusError, EmbeddingSeq, MelSpectrogram


def load_corpus(directory) -> tuple[list[AnnotatedUtterance], CorpusConfig]:
    root = Path(directory)
    config_path = root / "config.json"
    meta_path = root / "meta.jsonl"
    if not config_path.exists():
        raise CorpusError(f"missing corpus config: {config_path}")
    if not meta_path.exists():
        raise CorpusError(f"missing corpus meta: {meta_path}")
    config = CorpusConfig.from_dict(json.loads(config_path.read_text()))

    utts: list[AnnotatedUtterance] = []
    for line_no, line in enumerate(meta_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"meta.jsonl line {line_no}: bad JSON ({e})") from e
        uid = str(row.get("id", f"line-{line_no}"))
        try:
            mel_arr = read_ktns(root / row["mel"])
        except (OSError, KeyError) as e:
            raise CorpusError(f"utterance {uid}: cannot read mel ({e})") from e
        if mel_arr.ndim != 2:
            raise CorpusError(f"utterance {uid}: mel must be rank 2, got rank {mel_arr.ndim}")
        mel = MelSpectrogram(frames=mel_arr, hop=config.hop, window=config.window,
                             sample_rate=config.sample_rate)
        try:
            parse = (root / row["parse"]).read_text().strip()
        except (OSError, KeyError) as e:
            raise CorpusError(f"utterance {uid}: cannot read parse ({e})") from e
        embeddings = None
        if row.get("embeddings"):
            try:
                vecs = read_ktns(root / row["embeddings"])
            except OSError as e:
                raise CorpusError(f"utterance {uid}: cannot read embeddings ({e})") from e
            embeddings = EmbeddingSeq(vectors=vecs, wordpieces=list(row.get("wordpieces", [])))
        utt = AnnotatedUtterance(
            id=uid,
            text=str(row.get("text", "")),
            phonemes=[str(p) for p in row["phonemes"]],
            durations=[int(d) for d in row["durations"]],
            mel=mel,
            parse=parse,
            embeddings=embeddings,
        )
        utt.validate(config)
        utts.append(utt)

    utts.sort(key=lambda u: u.id)
    seen = set()
    for u in utts:
        if u.id in seen:
            raise CorpusError(f"duplicate utterance id {u.id}")
        seen.add(u.id)
    return utts, config


def write_corpus(directory, utterances: list[AnnotatedUtterance], config: CorpusConfig):
    """Write a corpus in the layout load_corpus expects."""
    root = Path(directory)
    for sub in ("mels", "parses", "embeds"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    lines = []
    for utt in utterances:
        mel_rel = f"mels/{utt.id}.ktns"
        parse_rel = f"parses/{utt.id}.txt"
        write_ktns(root / mel_rel, utt.mel.frames)
        (root / parse_rel).write_text(utt.parse + "\n")
        row = {
            "id": utt.id,
            "text": utt.text,
            "phonemes": utt.phonemes,
            "durations": utt.durations,
            "mel": mel_rel,
            "parse": parse_rel,
            "embeddings": None,
            "wordpieces": [],
        }
        if utt.embeddings is not None:
            emb_rel = f"embeds/{utt.id}.ktns"
            write_ktns(root / emb_rel, utt.embeddings.vectors)
            row["embeddings"] = emb_rel
            row["wordpieces"] = utt.embeddings.wordpieces
        lines.append(json.dumps(row, sort_keys=True))
    (root / "meta.jsonl").write_text("\n".join(lines) + "\n")


def split_corpus(utterances: list[AnnotatedUtterance], train_fraction: float,
                 seed: int) -> tuple[list[AnnotatedUtterance], list[AnnotatedUtterance]]:
    """Disjoint, exhaustive, seed-deterministic train/held-out split."""
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n = len(utterances)
    n_train = int(train_fraction * n)
    if n_train == 0 or n_train == n:
        raise CorpusError(
            f"degenerate split: {n_train}/{n - n_train} from {n} utterances at fraction {train_fraction}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train = [utterances[i] for i in sorted(perm[:n_train])]
    heldout = [utterances[i] for i in sorted(perm[n_train:])]
    return train, heldout
