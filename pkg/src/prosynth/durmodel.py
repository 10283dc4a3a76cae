"""Duration model: per-token frame counts predicted in a group-normalized
space.

Token durations are multi-modal (pauses live on a different scale than
phones), so training targets are z-scores within a token group: the default
grouping is pauses/punctuation vs everything else, swappable via config.
GroupStats carries each group's mean and population standard deviation and is
persisted verbatim into the duration checkpoint manifest.

The network is a phoneme-embedding biLSTM with a scalar head per token.  In
prosody-dependent mode the sentence latent z is concatenated to every
embedding row, which is the only difference from the baseline model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import (
    ParamStore,
    Tensor,
    absolute,
    bilstm_encode,
    bilstm_init,
    concat,
    constant,
    gather_rows,
    linear_forward,
    mean_all,
    mul,
    sub,
    tape,
    uniform_init,
)
from .diffcore.layers import embedding_lookup
from .numutil import round_half_away


class DurationError(ValueError):
    pass


PAUSE_TOKENS = ("sil", "sp")
PUNCT_TOKENS = (".", "?", "!", ",")


def default_grouping(inventory: list[str]) -> dict[str, list[str]]:
    """Two modes: pause/punctuation tokens vs phones."""
    pause = [t for t in inventory if t in PAUSE_TOKENS or t in PUNCT_TOKENS]
    phone = [t for t in inventory if t not in pause]
    return {"pause": pause, "phone": phone}


@dataclass
class GroupStat:
    group_id: str
    tokens: list[str]
    mu: float
    sigma: float


class GroupStats:
    """Partition of the token inventory into groups with duration statistics."""

    def __init__(self, groups: list[GroupStat]):
        self.groups = groups
        self._owner: dict[str, GroupStat] = {}
        for g in groups:
            if g.sigma <= 0.0:
                raise DurationError(f"group {g.group_id!r} has sigma {g.sigma} <= 0")
            for tok in g.tokens:
                if tok in self._owner:
                    raise DurationError(
                        f"token {tok!r} appears in groups {self._owner[tok].group_id!r} "
                        f"and {g.group_id!r}"
                    )
                self._owner[tok] = g

    def group_of(self, token: str) -> GroupStat:
        try:
            return self._owner[token]
        except KeyError:
            raise DurationError(f"token {token!r} belongs to no duration group") from None

    def normalize(self, d: float, token: str) -> float:
        g = self.group_of(token)
        return (d - g.mu) / g.sigma

    def denormalize(self, v: float, token: str) -> float:
        g = self.group_of(token)
        return v * g.sigma + g.mu

    def to_dict(self) -> list[dict]:
        return [{"group_id": g.group_id, "tokens": list(g.tokens),
                 "mu": g.mu, "sigma": g.sigma} for g in self.groups]

    @classmethod
    def from_dict(cls, rows: list[dict]) -> "GroupStats":
        return cls([GroupStat(group_id=r["group_id"], tokens=list(r["tokens"]),
                              mu=float(r["mu"]), sigma=float(r["sigma"]))
                    for r in rows])


def compute_group_stats(utterances, grouping: dict[str, list[str]]) -> GroupStats:
    """Exact mean and population std of observed durations per group."""
    owner = {}
    for gid, tokens in grouping.items():
        for tok in tokens:
            if tok in owner:
                raise DurationError(f"token {tok!r} in two groups: {owner[tok]!r}, {gid!r}")
            owner[tok] = gid
    observed: dict[str, list[int]] = {gid: [] for gid in grouping}
    for utt in utterances:
        for tok, d in zip(utt.phonemes, utt.durations):
            if tok not in owner:
                raise DurationError(
                    f"utterance {utt.id}: token {tok!r} belongs to no duration group"
                )
            observed[owner[tok]].append(d)

    stats = []
    for gid, tokens in grouping.items():
        obs = observed[gid]
        if len(obs) < 2:
            raise DurationError(
                f"group {gid!r} has {len(obs)} duration observations; need >= 2"
            )
        arr = np.asarray(obs, dtype=np.float64)
        mu = float(arr.mean())
        sigma = float(np.sqrt(np.mean((arr - mu) ** 2)))
        if sigma <= 0.0:
            raise DurationError(
                f"group {gid!r} has zero duration variance over {len(obs)} observations"
            )
        stats.append(GroupStat(group_id=gid, tokens=list(tokens), mu=mu, sigma=sigma))
    return GroupStats(stats)


def check_partition(stats: GroupStats, inventory: list[str]):
    """Every inventory token in exactly one group."""
    for tok in inventory:
        stats.group_of(tok)


# ---------------------------------------------------------------------------
# model

@dataclass
class DurModelConfig:
    phoneme_embed: int = 16
    hidden: int = 16
    z_dim: int = 0  # 0 = baseline (text only), > 0 = prosody-conditioned
    squared_loss: bool = False

    def to_dict(self) -> dict:
        return {"phoneme_embed": self.phoneme_embed, "hidden": self.hidden,
                "z_dim": self.z_dim, "squared_loss": self.squared_loss}

    @classmethod
    def from_dict(cls, d: dict) -> "DurModelConfig":
        return cls(phoneme_embed=int(d["phoneme_embed"]), hidden=int(d["hidden"]),
                   z_dim=int(d["z_dim"]), squared_loss=bool(d["squared_loss"]))


def init_duration_params(rng: np.random.Generator, config: DurModelConfig,
                         vocab_size: int, store: ParamStore | None = None) -> ParamStore:
    if store is None:
        store = ParamStore()
    store.add("dur/embed", uniform_init(rng, (vocab_size, config.phoneme_embed), 0.1))
    bilstm_init(rng, config.phoneme_embed + config.z_dim, config.hidden, store, "dur/lstm")
    scale = 1.0 / np.sqrt(2 * config.hidden)
    store.add("dur/out/w", uniform_init(rng, (2 * config.hidden, 1), scale))
    store.add("dur/out/b", np.zeros(1))
    return store


def duration_forward(tokens: list[str], store: ParamStore, vocab,
                     config: DurModelConfig, z: np.ndarray | None = None) -> Tensor:
    """Normalized duration predictions, one scalar row per token: [P, 1]."""
    if not tokens:
        raise DurationError("empty token sequence")
    if config.z_dim > 0:
        if z is None:
            raise DurationError("prosody-conditioned duration model needs z")
        z = np.asarray(z)
        if z.shape != (1, config.z_dim):
            raise DurationError(f"z must be [1, {config.z_dim}], got {z.shape}")
    elif z is not None:
        raise DurationError("baseline duration model got an unexpected z")

    emb = embedding_lookup(store["dur/embed"], vocab.ids(tokens))
    if config.z_dim > 0:
        z_rows = gather_rows(constant(z), np.zeros(len(tokens), dtype=np.int64))
        emb = concat([emb, z_rows], axis=1)
    out = bilstm_encode(emb, store, "dur/lstm", config.hidden)
    return linear_forward(out, store["dur/out/w"], store["dur/out/b"])


def duration_loss(predictions: Tensor, durations: list[int], tokens: list[str],
                  stats: GroupStats, squared: bool = False) -> Tensor:
    """Mean per-token deviation from the group z-score, absolute by default."""
    if predictions.dims[0] != len(durations) or len(durations) != len(tokens):
        raise DurationError(
            f"got {predictions.dims[0]} predictions, {len(durations)} durations, "
            f"{len(tokens)} tokens"
        )
    targets = np.array([[stats.normalize(d, t)] for d, t in zip(durations, tokens)])
    diff = sub(predictions, constant(targets))
    if squared:
        return mean_all(mul(diff, diff))
    return mean_all(absolute(diff))


def predict_durations(tokens: list[str], store: ParamStore, vocab,
                      config: DurModelConfig, stats: GroupStats,
                      z: np.ndarray | None = None) -> list[int]:
    """Denormalized integer frame counts, rounded half away from zero and
    floored at one frame."""
    norm = duration_forward(tokens, store, vocab, config, z)
    out = []
    for tok, v in zip(tokens, norm.data.reshape(-1)):
        frames = stats.denormalize(float(v), tok)
        out.append(max(1, round_half_away(frames)))
    return out


def duration_train_step(items, store: ParamStore, vocab, config: DurModelConfig,
                        stats: GroupStats) -> float:
    """One accumulation over [(tokens, durations, z-or-None), ...]; mean loss
    over the batch, gradients left in the store."""
    if not items:
        raise DurationError("empty duration batch")
    from .diffcore import reshape, sum_all

    with tape() as tp:
        terms = []
        for tokens, durations, z in items:
            pred = duration_forward(tokens, store, vocab, config, z)
            terms.append(reshape(
                duration_loss(pred, durations, tokens, stats, config.squared_loss),
                (1, 1)))
        loss = mul(sum_all(concat(terms, axis=0)), constant(1.0 / len(terms)))
        tp.backward(loss)
    return float(loss.data)
