"""Text-to-prosody samplers: predict the sentence-level Gaussian latent from
text alone, trained to match the reference encoder's posterior by closed-form
KL divergence.

Three variants share one projection pattern (sentence vector -> mu, logvar):

  semantic  contextual word-piece embeddings -> biLSTM -> concat of the first
            and last output rows -> projection          (namespace `sem/`)
  graph     word-stripped parse graph -> message-passing attention network ->
            leaf rows in depth-first order -> biLSTM -> same concat ->
            projection                                  (namespace `graph/`)
  combined  both pre-projection sentence vectors concatenated -> joint
            projection                                  (adds `comb/`)

The attention network uses a single head with parameters shared across the N
message passes; N comes from the train-split graph diameter distribution and
is frozen into the sampler checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustic import GaussianLatent
from .diffcore import (
    ParamStore,
    Tensor,
    add,
    bilstm_encode,
    bilstm_init,
    clamp_min,
    concat,
    constant,
    div,
    exp,
    gather_rows,
    leaky_relu,
    linear_forward,
    log,
    lstm_init,
    matmul,
    mul,
    narrow,
    reshape,
    row_sum,
    segment_sum,
    sub,
    sum_all,
    tanh,
    uniform_init,
)
from .diffcore.layers import EmptySequenceError, embedding_lookup
from .syntax import LabelVocab, SyntaxGraph

VARIANTS = ("semantic", "graph", "combined")
VARIANCE_FLOOR = 1e-6
ATTENTION_SLOPE = 0.2


class SamplerError(ValueError):
    pass


@dataclass
class SamplerConfig:
    variant: str = "semantic"
    latent_dim: int = 8
    embedding_dim: int = 16
    semantic_hidden: int = 16
    graph_hidden: int = 16
    graph_lstm_hidden: int = 16
    passes: int = 1  # frozen from the train split for graph variants
    reverse_kl: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SamplerError(f"unknown sampler variant {self.variant!r}")
        if self.passes < 1:
            raise SamplerError(f"message passes must be >= 1, got {self.passes}")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "latent_dim": self.latent_dim,
            "embedding_dim": self.embedding_dim,
            "semantic_hidden": self.semantic_hidden,
            "graph_hidden": self.graph_hidden,
            "graph_lstm_hidden": self.graph_lstm_hidden,
            "passes": self.passes,
            "reverse_kl": self.reverse_kl,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        d = dict(d)
        d["reverse_kl"] = bool(d.get("reverse_kl", False))
        for k in ("latent_dim", "embedding_dim", "semantic_hidden", "graph_hidden",
                  "graph_lstm_hidden", "passes"):
            d[k] = int(d[k])
        return cls(**d)


def init_sampler_params(rng: np.random.Generator, config: SamplerConfig,
                        num_labels: int, store: ParamStore | None = None) -> ParamStore:
    if store is None:
        store = ParamStore()
    c = config
    sem_vec = 4 * c.semantic_hidden  # concat of two biLSTM rows
    graph_vec = 4 * c.graph_lstm_hidden

    def proj(prefix: str, in_dim: int):
        scale = 1.0 / np.sqrt(in_dim)
        store.add(f"{prefix}/mu/w", uniform_init(rng, (in_dim, c.latent_dim), scale))
        store.add(f"{prefix}/mu/b", np.zeros(c.latent_dim))
        store.add(f"{prefix}/logvar/w", uniform_init(rng, (in_dim, c.latent_dim), scale))
        store.add(f"{prefix}/logvar/b", np.zeros(c.latent_dim))

    if c.variant in ("semantic", "combined"):
        bilstm_init(rng, c.embedding_dim, c.semantic_hidden, store, "sem/lstm")
    if c.variant in ("graph", "combined"):
        h = c.graph_hidden
        store.add("graph/embed", uniform_init(rng, (num_labels, h), 0.1))
        store.add("graph/att/u", uniform_init(rng, (h, h), 1.0 / np.sqrt(h)))
        store.add("graph/att/a", uniform_init(rng, (2 * h, 1), 1.0 / np.sqrt(2 * h)))
        bilstm_init(rng, h, c.graph_lstm_hidden, store, "graph/lstm")
    if c.variant == "semantic":
        proj("sem", sem_vec)
    elif c.variant == "graph":
        proj("graph", graph_vec)
    else:
        proj("comb", sem_vec + graph_vec)
    return store


def _first_last(rows: Tensor) -> Tensor:
    """Concat of the first and last rows of [L, H]; at L=1 the single row is
    duplicated."""
    length = rows.dims[0]
    first = narrow(rows, 0, 0, 1)
    last = narrow(rows, 0, length - 1, 1)
    return concat([first, last], axis=1)


def semantic_sentence_vector(embeddings: np.ndarray, store: ParamStore,
                             config: SamplerConfig) -> Tensor:
    if embeddings.ndim != 2 or embeddings.shape[0] < 1:
        raise EmptySequenceError(
            f"semantic sampler needs [L>=1, E] embeddings, got {embeddings.shape}"
        )
    if embeddings.shape[1] != config.embedding_dim:
        raise SamplerError(
            f"embedding dim {embeddings.shape[1]} != config {config.embedding_dim}"
        )
    out = bilstm_encode(constant(embeddings), store, "sem/lstm", config.semantic_hidden)
    return _first_last(out)


def mpgat_forward(graph: SyntaxGraph, store: ParamStore, vocab: LabelVocab,
                  passes: int, attention_out: list | None = None) -> Tensor:
    """N rounds of single-head attention message passing over the parse graph.

    Per pass, node i attends over its neighbors plus itself; logits are
    leaky-rectified a^T [U h_i || U h_j]; the new h_i is tanh of the
    attention-weighted sum of U h_j.  Parameters are shared across passes.
    If `attention_out` is given, the per-pass attention weight vectors
    (aligned with the edge list) are appended to it.
    """
    if passes < 1:
        raise SamplerError(f"message passes must be >= 1, got {passes}")
    n = graph.num_nodes
    dst_ids, src_ids = [], []
    for i in range(n):
        for j in list(graph.adjacency[i]) + [i]:  # neighborhood including self
            dst_ids.append(i)
            src_ids.append(j)
    dst = np.asarray(dst_ids, dtype=np.int64)
    src = np.asarray(src_ids, dtype=np.int64)

    h = embedding_lookup(store["graph/embed"], vocab.ids(graph.labels))
    u_w, a_w = store["graph/att/u"], store["graph/att/a"]
    for _ in range(passes):
        u = matmul(h, u_w)
        u_dst = gather_rows(u, dst)
        u_src = gather_rows(u, src)
        # row-wise dot against `a` as broadcast mul + row_sum: a BLAS matvec
        # rounds tail rows differently from body rows, which would break
        # exact (bitwise) permutation equivariance of the node updates
        pre = row_sum(mul(concat([u_dst, u_src], axis=1),
                          reshape(a_w, (1, a_w.dims[0]))))
        logits = leaky_relu(pre, ATTENTION_SLOPE)
        # detached per-destination max keeps exp in range without touching grads
        seg_max = np.full((n, 1), -np.inf, dtype=logits.data.dtype)
        np.maximum.at(seg_max, dst, logits.data)
        shifted = sub(logits, constant(seg_max[dst]))
        ex = exp(shifted)
        denom = segment_sum(ex, dst, n)
        att = div(ex, gather_rows(denom, dst))
        if attention_out is not None:
            attention_out.append(att.data.reshape(-1).copy())
        h = tanh(segment_sum(mul(u_src, att), dst, n))
    return h


def graph_sentence_vector(graph: SyntaxGraph, store: ParamStore, vocab: LabelVocab,
                          config: SamplerConfig) -> Tensor:
    nodes = mpgat_forward(graph, store, vocab, config.passes)
    leaves = gather_rows(nodes, np.asarray(graph.leaf_order, dtype=np.int64))
    out = bilstm_encode(leaves, store, "graph/lstm", config.graph_lstm_hidden)
    return _first_last(out)


def _project(vec: Tensor, store: ParamStore, prefix: str) -> GaussianLatent:
    mu = linear_forward(vec, store[f"{prefix}/mu/w"], store[f"{prefix}/mu/b"])
    logvar = linear_forward(vec, store[f"{prefix}/logvar/w"], store[f"{prefix}/logvar/b"])
    return GaussianLatent(mean=mu, log_var=logvar)


def semantic_forward(embeddings: np.ndarray, store: ParamStore,
                     config: SamplerConfig) -> GaussianLatent:
    return _project(semantic_sentence_vector(embeddings, store, config), store, "sem")


def graph_forward(graph: SyntaxGraph, store: ParamStore, vocab: LabelVocab,
                  config: SamplerConfig) -> GaussianLatent:
    return _project(graph_sentence_vector(graph, store, vocab, config), store, "graph")


def combined_forward(embeddings: np.ndarray, graph: SyntaxGraph, store: ParamStore,
                     vocab: LabelVocab, config: SamplerConfig) -> GaussianLatent:
    if embeddings is None or graph is None:
        raise SamplerError("combined sampler needs both embeddings and a parse graph")
    vec = concat([semantic_sentence_vector(embeddings, store, config),
                  graph_sentence_vector(graph, store, vocab, config)], axis=1)
    return _project(vec, store, "comb")


def sampler_forward(store: ParamStore, config: SamplerConfig, vocab: LabelVocab | None,
                    embeddings: np.ndarray | None = None,
                    graph: SyntaxGraph | None = None) -> GaussianLatent:
    """Variant dispatch; errors if the variant's inputs are missing."""
    if config.variant == "semantic":
        if embeddings is None:
            raise SamplerError("semantic sampler needs embeddings")
        return semantic_forward(embeddings, store, config)
    if config.variant == "graph":
        if graph is None:
            raise SamplerError("graph sampler needs a parse graph")
        return graph_forward(graph, store, vocab, config)
    if embeddings is None or graph is None:
        raise SamplerError("combined sampler needs both embeddings and a parse graph")
    return combined_forward(embeddings, graph, store, vocab, config)


def kl_divergence(pred: GaussianLatent, target: GaussianLatent,
                  reverse: bool = False) -> Tensor:
    """Closed-form KL between diagonal Gaussians, prediction first:

        KL(pred || target) = 1/2 (sum_i log s2_t - log s2_p + s2_p/s2_t
                                  + (mu_t - mu_p)^2 / s2_t  - D)

    Variances are floored at 1e-6 before use.  `reverse` swaps the roles.
    """
    if pred.dim != target.dim:
        raise SamplerError(f"latent dims disagree: {pred.dim} vs {target.dim}")
    if reverse:
        pred, target = target, pred
    vp = clamp_min(exp(pred.log_var), VARIANCE_FLOOR)
    vt = clamp_min(exp(target.log_var), VARIANCE_FLOOR)
    dmu = sub(target.mean, pred.mean)
    terms = add(add(sub(log(vt), log(vp)), div(vp, vt)), div(mul(dmu, dmu), vt))
    return mul(sub(sum_all(terms), constant(float(pred.dim))), constant(0.5))


def detached_latent(latent: GaussianLatent) -> GaussianLatent:
    """Copy with gradients blocked; used for Stage-Ⅱ targets."""
    return GaussianLatent(mean=constant(latent.mean.data.copy()),
                          log_var=constant(latent.log_var.data.copy()))


@dataclass
class SamplerInput:
    """Per-utterance text inputs, preprocessed once and reused across epochs."""

    embeddings: np.ndarray | None = None
    graph: SyntaxGraph | None = None


def prepare_sampler_input(utterance, config: SamplerConfig) -> SamplerInput:
    """Pull what the variant needs out of an annotated utterance."""
    from .syntax import parse_penn, strip_words, tree_to_graph

    inp = SamplerInput()
    if config.variant in ("semantic", "combined"):
        if utterance.embeddings is None:
            raise SamplerError(
                f"utterance {utterance.id}: no embeddings for {config.variant} sampler"
            )
        inp.embeddings = utterance.embeddings.vectors
    if config.variant in ("graph", "combined"):
        if not utterance.parse:
            raise SamplerError(
                f"utterance {utterance.id}: no parse for {config.variant} sampler"
            )
        inp.graph = tree_to_graph(strip_words(parse_penn(utterance.parse)))
    return inp


def sampler_kl_step(inputs: list[SamplerInput], targets: list[GaussianLatent],
                    store: ParamStore, config: SamplerConfig,
                    vocab: LabelVocab | None) -> float:
    """One gradient accumulation over a batch: mean KL(pred, target), backward
    into the sampler store.  Targets must already be gradient-blocked."""
    from .diffcore import tape

    if len(inputs) != len(targets):
        raise SamplerError(f"{len(inputs)} inputs for {len(targets)} targets")
    if not inputs:
        raise SamplerError("empty sampler batch")
    with tape() as tp:
        terms = []
        for inp, target in zip(inputs, targets):
            pred = sampler_forward(store, config, vocab,
                                   embeddings=inp.embeddings, graph=inp.graph)
            terms.append(kl_divergence(pred, target, reverse=config.reverse_kl))
        loss = mul(sum_all(concat([reshape_scalar(t) for t in terms], axis=0)),
                   constant(1.0 / len(terms)))
        tp.backward(loss)
    return float(loss.data)


def reshape_scalar(t: Tensor) -> Tensor:
    """Scalar tensor as a [1, 1] row so batch terms can be concatenated."""
    from .diffcore import reshape

    return reshape(t, (1, 1))


def train_sampler_step(batch, store: ParamStore, config: SamplerConfig,
                       vocab: LabelVocab | None, acoustic_store: ParamStore,
                       acoustic_config) -> float:
    """Spec-level step over raw utterances: reference-encode targets with
    gradients blocked, then KL-match the sampler to them."""
    from .acoustic import reference_encode

    inputs = [prepare_sampler_input(u, config) for u in batch]
    targets = [detached_latent(reference_encode(u.mel.frames, acoustic_store,
                                                acoustic_config))
               for u in batch]
    return sampler_kl_step(inputs, targets, store, config, vocab)
