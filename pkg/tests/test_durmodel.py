"""Group statistics, normalized duration loss with an independent Eq-style
oracle, and the prediction path with rounding and flooring."""

import numpy as np
import pytest

from prosynth.acoustic import PhonemeVocab
from prosynth.corpus import load_corpus, synth_corpus
from prosynth.durmodel import (
    DurationError,
    DurModelConfig,
    GroupStat,
    GroupStats,
    check_partition,
    compute_group_stats,
    default_grouping,
    duration_forward,
    duration_loss,
    duration_train_step,
    init_duration_params,
    predict_durations,
)
from prosynth.diffcore import (
    AdamState,
    ParamStore,
    Tensor,
    adam_step,
    grad_check,
    use_dtype,
)


class _FakeUtt:
    def __init__(self, uid, phonemes, durations):
        self.id = uid
        self.phonemes = phonemes
        self.durations = durations


def _stats(mu=3.0, sigma=1.0, tokens=("a", "b")):
    return GroupStats([GroupStat("g", list(tokens), mu, sigma)])


# ---------------------------------------------------------------------------
# group stats

def test_single_group_stats():
    utts = [_FakeUtt("u0", ["a", "a"], [2, 4])]
    stats = compute_group_stats(utts, {"g": ["a"]})
    g = stats.group_of("a")
    assert g.mu == 3.0 and g.sigma == 1.0


def test_two_group_stats():
    utts = [_FakeUtt("u0", ["sil", "a"], [10, 2]),
            _FakeUtt("u1", ["sil", "a"], [20, 4])]
    stats = compute_group_stats(utts, {"pause": ["sil"], "phone": ["a"]})
    assert stats.group_of("sil").mu == 15.0 and stats.group_of("sil").sigma == 5.0
    assert stats.group_of("a").mu == 3.0 and stats.group_of("a").sigma == 1.0


def test_stats_match_brute_force_on_synthetic(tmp_path):
    synth_corpus(tmp_path, 40, seed=21)
    utts, config = load_corpus(tmp_path)
    grouping = default_grouping(config.phoneme_inventory)
    stats = compute_group_stats(utts, grouping)

    # independent single pass: flat lists, then plain mean / sqrt(mean sq dev)
    flat = {gid: [] for gid in grouping}
    member = {t: gid for gid, toks in grouping.items() for t in toks}
    for u in utts:
        for tok, d in zip(u.phonemes, u.durations):
            flat[member[tok]].append(float(d))
    for gid, values in flat.items():
        mu = sum(values) / len(values)
        sigma = (sum((v - mu) ** 2 for v in values) / len(values)) ** 0.5
        g = stats.group_of(grouping[gid][0])
        assert g.mu == pytest.approx(mu, abs=1e-12)
        assert g.sigma == pytest.approx(sigma, abs=1e-12)


def test_partition_checked(tmp_path):
    synth_corpus(tmp_path, 10, seed=2)
    utts, config = load_corpus(tmp_path)
    grouping = default_grouping(config.phoneme_inventory)
    ids = [set(toks) for toks in grouping.values()]
    assert set.union(*ids) == set(config.phoneme_inventory)
    assert set.intersection(*ids) == set()
    stats = compute_group_stats(utts, grouping)
    check_partition(stats, config.phoneme_inventory)


def test_stats_errors():
    with pytest.raises(DurationError, match="no duration group"):
        compute_group_stats([_FakeUtt("u0", ["x"], [1])], {"g": ["a"]})
    with pytest.raises(DurationError, match=">= 2"):
        compute_group_stats([_FakeUtt("u0", ["a"], [5])], {"g": ["a"], "h": []})
    with pytest.raises(DurationError, match="zero duration variance"):
        compute_group_stats([_FakeUtt("u0", ["a", "a"], [4, 4])], {"g": ["a"]})
    with pytest.raises(DurationError, match="two groups"):
        compute_group_stats([_FakeUtt("u0", ["a", "a"], [1, 2])],
                            {"g": ["a"], "h": ["a"]})
    with pytest.raises(DurationError):
        GroupStats([GroupStat("g", ["a"], 3.0, 0.0)])


# ---------------------------------------------------------------------------
# normalize / denormalize

def test_normalize_examples():
    stats = _stats(mu=3.0, sigma=1.0)
    assert stats.normalize(4, "a") == 1.0
    assert stats.normalize(3, "a") == 0.0
    assert stats.denormalize(0.0, "a") == 3.0


def test_normalize_inverse_property(rng):
    stats = GroupStats([GroupStat("g", ["a"], 7.3, 2.11),
                        GroupStat("h", ["b"], 12.0, 4.5)])
    for _ in range(1000):
        d = float(rng.uniform(-50, 50))
        tok = "a" if rng.random() < 0.5 else "b"
        assert stats.denormalize(stats.normalize(d, tok), tok) == pytest.approx(d, abs=1e-9)


def test_normalized_targets_standardized(tmp_path):
    # per group over the corpus: mean 0, population std 1 by construction
    synth_corpus(tmp_path, 30, seed=5)
    utts, config = load_corpus(tmp_path)
    grouping = default_grouping(config.phoneme_inventory)
    stats = compute_group_stats(utts, grouping)
    member = {t: gid for gid, toks in grouping.items() for t in toks}
    normalized = {gid: [] for gid in grouping}
    for u in utts:
        for tok, d in zip(u.phonemes, u.durations):
            normalized[member[tok]].append(stats.normalize(d, tok))
    for values in normalized.values():
        arr = np.asarray(values)
        assert abs(arr.mean()) < 1e-6
        assert abs(np.sqrt(np.mean((arr - arr.mean()) ** 2)) - 1.0) < 1e-6


def test_unknown_token_rejected():
    with pytest.raises(DurationError):
        _stats().normalize(1.0, "zz")


# ---------------------------------------------------------------------------
# loss

def _pred(values):
    return Tensor(np.asarray(values, dtype=np.float32).reshape(-1, 1))


def test_loss_zero_at_exact_targets():
    stats = _stats(mu=3.0, sigma=1.0)
    targets = [stats.normalize(d, "a") for d in (2, 5)]
    loss = duration_loss(_pred(targets), [2, 5], ["a", "a"], stats)
    assert loss.item() == 0.0


def test_loss_forced_arithmetic():
    stats = _stats(mu=3.0, sigma=1.0)
    # normalized targets for durations (2, 4) are (-1, +1)
    loss = duration_loss(_pred([0.0, 0.0]), [2, 4], ["a", "a"], stats)
    assert loss.item() == pytest.approx(1.0, abs=1e-7)


def test_loss_squared_mode():
    stats = _stats(mu=3.0, sigma=1.0)
    # targets (-2, +1): abs mean = 1.5, squared mean = 2.5
    loss_abs = duration_loss(_pred([0.0, 0.0]), [1, 4], ["a", "a"], stats, squared=False)
    loss_sq = duration_loss(_pred([0.0, 0.0]), [1, 4], ["a", "a"], stats, squared=True)
    assert loss_abs.item() == pytest.approx(1.5, abs=1e-6)
    assert loss_sq.item() == pytest.approx(2.5, abs=1e-6)


def test_loss_matches_independent_oracle(rng):
    # separate code path: explicit membership-exponent product per token
    stats = GroupStats([GroupStat("pause", ["sil"], 11.0, 3.0),
                        GroupStat("phone", ["a", "b"], 4.0, 1.5)])
    groups = {g.group_id: g for g in stats.groups}
    for _ in range(50):
        p = int(rng.integers(1, 9))
        tokens = [str(rng.choice(["sil", "a", "b"])) for _ in range(p)]
        durations = [int(rng.integers(1, 20)) for _ in range(p)]
        preds = rng.normal(size=p)

        total = 0.0
        for tok, d, v in zip(tokens, durations, preds):
            z = 1.0
            for g in groups.values():
                factor = (d - g.mu) / g.sigma
                z *= factor ** (1 if tok in g.tokens else 0)
            total += abs(v - z)
        oracle = total / p

        loss = duration_loss(_pred(preds), durations, tokens, stats)
        assert loss.item() == pytest.approx(oracle, rel=1e-5)


def test_loss_length_mismatch():
    stats = _stats()
    with pytest.raises(DurationError):
        duration_loss(_pred([0.0]), [1, 2], ["a", "a"], stats)


# ---------------------------------------------------------------------------
# model predictions

INV = ["a", "b", "sil"]


def _model(z_dim=0, seed=0):
    config = DurModelConfig(phoneme_embed=4, hidden=3, z_dim=z_dim)
    vocab = PhonemeVocab(INV)
    store = init_duration_params(np.random.default_rng(seed), config, len(vocab))
    return config, vocab, store


def test_predict_zero_network_gives_group_mean():
    config, vocab, store = _model()
    for _, t in store.items():
        t.data[:] = 0.0
    stats = GroupStats([GroupStat("g", INV, 3.0, 1.0)])
    assert predict_durations(["a", "b"], store, vocab, config, stats) == [3, 3]


def test_predict_clamps_to_one_frame():
    config, vocab, store = _model()
    for _, t in store.items():
        t.data[:] = 0.0
    store["dur/out/b"].data[:] = -2.8  # denormalizes to 0.2 with (mu=3, sigma=1)
    stats = GroupStats([GroupStat("g", INV, 3.0, 1.0)])
    assert predict_durations(["a"], store, vocab, config, stats) == [1]


def test_predict_rounds_half_away():
    config, vocab, store = _model()
    for _, t in store.items():
        t.data[:] = 0.0
    store["dur/out/b"].data[:] = 0.5  # denormalizes to 3.5
    stats = GroupStats([GroupStat("g", INV, 3.0, 1.0)])
    assert predict_durations(["a"], store, vocab, config, stats) == [4]


def test_predict_always_at_least_one(rng):
    config, vocab, store = _model(seed=4)
    stats = GroupStats([GroupStat("g", INV, 2.0, 3.0)])
    for _ in range(20):
        toks = [str(rng.choice(INV)) for _ in range(int(rng.integers(1, 10)))]
        assert all(d >= 1 for d in predict_durations(toks, store, vocab, config, stats))


def test_z_conditioning_contract():
    config, vocab, store = _model(z_dim=3, seed=1)
    with pytest.raises(DurationError, match="needs z"):
        duration_forward(["a"], store, vocab, config)
    with pytest.raises(DurationError, match="must be"):
        duration_forward(["a"], store, vocab, config, np.zeros((1, 2)))
    base_config, base_vocab, base_store = _model(z_dim=0, seed=1)
    with pytest.raises(DurationError, match="unexpected z"):
        duration_forward(["a"], base_store, base_vocab, base_config, np.zeros((1, 3)))


def test_z_changes_predictions():
    config, vocab, store = _model(z_dim=3, seed=6)
    za = np.full((1, 3), 2.0, dtype=np.float32)
    zb = np.full((1, 3), -2.0, dtype=np.float32)
    a = duration_forward(["a", "b", "sil"], store, vocab, config, za)
    b = duration_forward(["a", "b", "sil"], store, vocab, config, zb)
    assert not np.allclose(a.data, b.data)


def test_duration_gradcheck():
    with use_dtype(np.float64):
        config = DurModelConfig(phoneme_embed=3, hidden=2, z_dim=2)
        vocab = PhonemeVocab(INV)
        store = init_duration_params(np.random.default_rng(8), config, len(vocab))
        stats = GroupStats([GroupStat("g", INV, 3.0, 1.5)])
        z = np.random.default_rng(9).normal(size=(1, 2))

        def fn(p):
            pred = duration_forward(["a", "sil", "b"], p, vocab, config, z)
            # squared mode keeps the objective smooth for finite differences
            return duration_loss(pred, [2, 9, 4], ["a", "sil", "b"], stats, squared=True)

        assert grad_check(fn, store) < 1e-4


def test_duration_train_step_decreases_loss():
    config, vocab, store = _model(seed=12)
    stats = GroupStats([GroupStat("g", INV, 4.0, 2.0)])
    items = [(["a", "b", "sil"], [3, 5, 7], None),
             (["b", "a"], [2, 6], None)]
    adam = AdamState(lr=1e-2)
    first = duration_train_step(items, store, vocab, config, stats)
    adam_step(store, adam)
    for _ in range(200):
        last = duration_train_step(items, store, vocab, config, stats)
        adam_step(store, adam)
    assert last < first * 0.5


def test_config_roundtrip():
    c = DurModelConfig(phoneme_embed=8, hidden=4, z_dim=5, squared_loss=True)
    assert DurModelConfig.from_dict(c.to_dict()) == c
