"""Reverse-mode autodiff on numpy arrays.

A Tensor wraps an ndarray; operations executed while a Tape is active record
backward closures on that tape.  Tape.backward walks the closures in reverse,
accumulating into .grad.  Training runs in float32; gradient checks switch the
default dtype to float64 via use_dtype().

Ops only record when some input requires grad, so inference outside a tape
(or on constants) pays no tracking cost.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


_DEFAULT_DTYPE = np.float32


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def use_dtype(dtype):
    """Temporarily switch the dtype used for newly created tensors."""
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(dims={self.dims}{tag}, grad={'set' if self.grad is not None else 'none'})"

    # operator sugar; scalars are wrapped as non-grad constants
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_DEFAULT_DTYPE))


class Tape:
    """Ordered record of backward closures for one forward computation."""

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: list = []

    def append(self, fn):
        self._entries.append(fn)

    def __len__(self):
        return len(self._entries)

    def backward(self, loss: Tensor):
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got dims {loss.dims}")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._entries):
            fn()


_tape_stack: list[Tape] = []


@contextlib.contextmanager
def tape():
    t = Tape()
    _tape_stack.append(t)
    try:
        yield t
    finally:
        _tape_stack.pop()


def _recording(*tensors: Tensor) -> bool:
    return bool(_tape_stack) and any(t.requires_grad for t in tensors)


def _record(fn):
    _tape_stack[-1].append(fn)


def _accum(t: Tensor, g: np.ndarray):
    # first write copies so later in-place += never aliases an upstream buffer
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)
    if _recording(a, b):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g, b.data.shape))

        _record(bwd)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)
    if _recording(a, b):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(-g, b.data.shape))

        _record(bwd)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)
    if _recording(a, b):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                _accum(a, _unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g * a.data, b.data.shape))

        _record(bwd)
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data)
    if _recording(a, b):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                _accum(a, _unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        _record(bwd)
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, -out.grad)

        _record(bwd)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.dims} @ {b.dims}")
    if a.dims[1] != b.dims[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.dims} @ {b.dims}")
    out = Tensor(a.data @ b.data)
    if _recording(a, b):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            if a.requires_grad:
                _accum(a, g @ b.data.T)
            if b.requires_grad:
                _accum(b, a.data.T @ g)

        _record(bwd)
    return out


# ---------------------------------------------------------------------------
# elementwise nonlinearities

def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y)
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * y)

        _record(bwd)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad / a.data)

        _record(bwd)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * (1.0 - y * y))

        _record(bwd)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y)
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * y * (1.0 - y))

        _record(bwd)
    return out


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, slope * a.data))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * np.where(mask, 1.0, slope))

        _record(bwd)
    return out


def absolute(a: Tensor) -> Tensor:
    # subgradient 0 at exactly 0
    s = np.sign(a.data)
    out = Tensor(np.abs(a.data))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * s)

        _record(bwd)
    return out


def clamp_min(a: Tensor, floor: float) -> Tensor:
    mask = a.data > floor
    out = Tensor(np.where(mask, a.data, floor))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * mask)

        _record(bwd)
    return out


# ---------------------------------------------------------------------------
# reductions

def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.sum(a.data))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, np.broadcast_to(out.grad, a.data.shape))

        _record(bwd)
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(np.mean(a.data))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, np.broadcast_to(out.grad / n, a.data.shape))

        _record(bwd)
    return out


def row_sum(a: Tensor) -> Tensor:
    """[m, k] -> [m, 1], summing along axis 1.

    Unlike a matvec against a ones column, the per-row fold order here does
    not depend on the row's position, so equal rows sum to equal bits."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_sum expects a matrix, got dims {a.dims}")
    out = Tensor(np.sum(a.data, axis=1, keepdims=True))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, np.broadcast_to(out.grad, a.data.shape))

        _record(bwd)
    return out


# ---------------------------------------------------------------------------
# shape ops

def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    if _recording(*parts):
        out.requires_grad = True
        sizes = [p.data.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)

        def bwd():
            g = out.grad
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if p.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    _accum(p, g[tuple(idx)])

        _record(bwd)
    return out


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = Tensor(a.data[idx])
    if _recording(a):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            full = np.zeros_like(a.data)
            full[idx] = g
            _accum(a, full)

        _record(bwd)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad.reshape(a.data.shape))

        _record(bwd)
    return out


def gather_rows(a: Tensor, ids) -> Tensor:
    """Rows of a 2-D tensor by index; backward is an exact scatter-add."""
    ids = np.asarray(ids, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D tensor, got dims {a.dims}")
    if ids.size and (ids.min() < 0 or ids.max() >= a.dims[0]):
        raise IndexError(
            f"gather_rows id out of range: ids within [{ids.min()}, {ids.max()}], table has {a.dims[0]} rows"
        )
    out = Tensor(a.data[ids])
    if _recording(a):
        out.requires_grad = True

        def bwd():
            g = out.grad
            if g is None:
                return
            full = np.zeros_like(a.data)
            np.add.at(full, ids, g)
            _accum(a, full)

        _record(bwd)
    return out


def segment_sum(a: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Sum rows of a [M, K] tensor into [num_segments, K] buckets.

    Accumulation follows row order within each segment, so relabelling nodes
    while preserving each segment's row order reproduces sums bit-exactly.
    """
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"segment_sum expects a 2-D tensor, got dims {a.dims}")
    if segment_ids.shape[0] != a.dims[0]:
        raise ShapeError("segment_ids length must match row count")
    res = np.zeros((num_segments, a.dims[1]), dtype=a.data.dtype)
    np.add.at(res, segment_ids, a.data)
    out = Tensor(res)
    if _recording(a):
        out.requires_grad = True

        def bwd():
            if out.grad is not None:
                _accum(a, out.grad[segment_ids])

        _record(bwd)
    return out


# ---------------------------------------------------------------------------
# fused recurrent gate update

def lstm_gates(pre: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """Apply the four-gate update to pre-activations [.., 4H] and cell [.., H].

    Gate order is [input, forget, candidate, output].  Fusing the gate
    nonlinearities keeps the tape short on long sequences.
    """
    h_dim = c.data.shape[-1]
    if pre.data.shape[-1] != 4 * h_dim:
        raise ShapeError(f"lstm_gates needs pre dims [.., 4H]; got {pre.dims} with H={h_dim}")
    ai = pre.data[..., 0 * h_dim:1 * h_dim]
    af = pre.data[..., 1 * h_dim:2 * h_dim]
    ag = pre.data[..., 2 * h_dim:3 * h_dim]
    ao = pre.data[..., 3 * h_dim:4 * h_dim]
    i = 1.0 / (1.0 + np.exp(-ai))
    f = 1.0 / (1.0 + np.exp(-af))
    g = np.tanh(ag)
    o = 1.0 / (1.0 + np.exp(-ao))
    c_new = f * c.data + i * g
    tc = np.tanh(c_new)
    h_out = Tensor(o * tc)
    c_out = Tensor(c_new)
    if _recording(pre, c):
        h_out.requires_grad = True
        c_out.requires_grad = True

        def bwd():
            dh = h_out.grad
            dc_down = c_out.grad
            if dh is None and dc_down is None:
                return
            dc = np.zeros_like(c_new) if dc_down is None else np.array(dc_down)
            if dh is not None:
                do = dh * tc
                dc += dh * o * (1.0 - tc * tc)
            else:
                do = np.zeros_like(o)
            if pre.requires_grad:
                dpre = np.empty_like(pre.data)
                dpre[..., 0 * h_dim:1 * h_dim] = dc * g * i * (1.0 - i)
                dpre[..., 1 * h_dim:2 * h_dim] = dc * c.data * f * (1.0 - f)
                dpre[..., 2 * h_dim:3 * h_dim] = dc * i * (1.0 - g * g)
                dpre[..., 3 * h_dim:4 * h_dim] = do * o * (1.0 - o)
                _accum(pre, dpre)
            if c.requires_grad:
                _accum(c, dc * f)

        _record(bwd)
    return h_out, c_out
