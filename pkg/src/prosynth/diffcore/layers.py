"""Layer-level building blocks: affine maps, embeddings, LSTM cells, biLSTM.

Conventions: sequences are [L, dim] tensors, single vectors are [1, dim] rows.
LSTM gate order is [input, forget, candidate, output]; weights initialize
uniform within +/- 1/sqrt(H) and biases start at zero, so checkpoints written
by one build load identically in another.
"""

from __future__ import annotations

import numpy as np

from .params import ParamStore, uniform_init
from .tensor import (
    ShapeError,
    Tensor,
    add,
    concat,
    exp,
    gather_rows,
    lstm_gates,
    matmul,
    mul,
    narrow,
    zeros,
)


class EmptySequenceError(ValueError):
    """Sequence ops need at least one element."""


def linear_forward(x: Tensor, weights: Tensor, bias: Tensor | None = None) -> Tensor:
    if x.dims[-1] != weights.dims[0]:
        raise ShapeError(f"linear_forward: input dim {x.dims} vs weights {weights.dims}")
    y = matmul(x, weights)
    if bias is not None:
        if bias.dims[-1] != weights.dims[1]:
            raise ShapeError(f"linear_forward: bias dims {bias.dims} vs weights {weights.dims}")
        y = add(y, bias)
    return y


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.dims[0]):
        raise IndexError(
            f"embedding id out of range: table has {table.dims[0]} rows, ids span "
            f"[{ids.min()}, {ids.max()}]"
        )
    return gather_rows(table, ids)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor,
              b: Tensor) -> tuple[Tensor, Tensor]:
    """One gated recurrent update; returns (h', c')."""
    pre = add(add(matmul(x, wx), matmul(h, wh)), b)
    return lstm_gates(pre, c)


def lstm_init(rng: np.random.Generator, in_dim: int, hidden: int, store: ParamStore,
              prefix: str):
    scale = 1.0 / np.sqrt(hidden)
    store.add(f"{prefix}/wx", uniform_init(rng, (in_dim, 4 * hidden), scale))
    store.add(f"{prefix}/wh", uniform_init(rng, (hidden, 4 * hidden), scale))
    store.add(f"{prefix}/b", np.zeros(4 * hidden))


def bilstm_init(rng: np.random.Generator, in_dim: int, hidden: int, store: ParamStore,
                prefix: str):
    lstm_init(rng, in_dim, hidden, store, f"{prefix}/fwd")
    lstm_init(rng, in_dim, hidden, store, f"{prefix}/bwd")


def _run_direction(rows: list[Tensor], wx, wh, b, hidden: int) -> list[Tensor]:
    h = zeros((1, hidden))
    c = zeros((1, hidden))
    states = []
    for x in rows:
        h, c = lstm_cell(x, h, c, wx, wh, b)
        states.append(h)
    return states


def lstm_last(seq: Tensor, store: ParamStore, prefix: str, hidden: int) -> Tensor:
    """Unidirectional LSTM over [L, in]; returns the final hidden state [1, H]."""
    if seq.dims[0] == 0:
        raise EmptySequenceError("lstm_last: empty input sequence")
    rows = [narrow(seq, 0, i, 1) for i in range(seq.dims[0])]
    states = _run_direction(rows, store[f"{prefix}/wx"], store[f"{prefix}/wh"],
                            store[f"{prefix}/b"], hidden)
    return states[-1]


def bilstm_encode(seq: Tensor, store: ParamStore, prefix: str, hidden: int) -> Tensor:
    """Bidirectional LSTM over [L, in]; per-step forward and backward states
    concatenated to [L, 2H]."""
    if seq.dims[0] == 0:
        raise EmptySequenceError("bilstm_encode: empty input sequence")
    length = seq.dims[0]
    rows = [narrow(seq, 0, i, 1) for i in range(length)]
    fwd = _run_direction(rows, store[f"{prefix}/fwd/wx"], store[f"{prefix}/fwd/wh"],
                         store[f"{prefix}/fwd/b"], hidden)
    bwd_rev = _run_direction(rows[::-1], store[f"{prefix}/bwd/wx"], store[f"{prefix}/bwd/wh"],
                             store[f"{prefix}/bwd/b"], hidden)
    bwd = bwd_rev[::-1]
    return concat([concat([f, b], axis=1) for f, b in zip(fwd, bwd)], axis=0)


def reparameterize(mu: Tensor, logvar: Tensor, noise: Tensor) -> Tensor:
    """z = mu + exp(logvar / 2) * noise with externally injected noise, so every
    sampling step is replayable."""
    if mu.dims != logvar.dims or mu.dims != noise.dims:
        raise ShapeError(
            f"reparameterize dims disagree: mu {mu.dims}, logvar {logvar.dims}, noise {noise.dims}"
        )
    std = exp(mul(logvar, Tensor(0.5)))
    return add(mu, mul(std, noise))
