"""Differentiable numeric primitives: tensors, tape, layers, Adam, gradient checks."""

from .tensor import (
    Tensor,
    Tape,
    ShapeError,
    tape,
    use_dtype,
    default_dtype,
    constant,
    zeros,
    add,
    sub,
    mul,
    div,
    neg,
    matmul,
    exp,
    log,
    tanh,
    sigmoid,
    leaky_relu,
    absolute,
    clamp_min,
    sum_all,
    mean_all,
    row_sum,
    concat,
    narrow,
    reshape,
    gather_rows,
    segment_sum,
    lstm_gates,
)
from .params import ParamStore, uniform_init
from .layers import (
    EmptySequenceError,
    linear_forward,
    embedding_lookup,
    lstm_cell,
    lstm_last,
    bilstm_encode,
    reparameterize,
    lstm_init,
    bilstm_init,
)
from .adam import AdamState, TrainingDivergenceError, adam_step
from .gradcheck import grad_check
from .ktns import KTNSError, read_ktns, write_ktns

__all__ = [
    "Tensor", "Tape", "ShapeError", "tape", "use_dtype", "default_dtype",
    "constant", "zeros", "add", "sub", "mul", "div", "neg", "matmul",
    "exp", "log", "tanh", "sigmoid", "leaky_relu", "absolute", "clamp_min",
    "sum_all", "mean_all", "row_sum", "concat", "narrow", "reshape", "gather_rows",
    "segment_sum", "lstm_gates",
    "ParamStore", "uniform_init",
    "EmptySequenceError", "linear_forward", "embedding_lookup", "lstm_cell",
    "lstm_last", "bilstm_encode", "reparameterize", "lstm_init", "bilstm_init",
    "AdamState", "TrainingDivergenceError", "adam_step",
    "grad_check",
    "KTNSError", "read_ktns", "write_ktns",
]
