"""Adam optimizer over a ParamStore."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class TrainingDivergenceError(RuntimeError):
    """Raised when a gradient goes non-finite; names the offending parameter."""


class AdamState:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def moments(self, name: str, shape, dtype):
        if name not in self._m:
            self._m[name] = np.zeros(shape, dtype=dtype)
            self._v[name] = np.zeros(shape, dtype=dtype)
        return self._m[name], self._v[name]


def adam_step(params: ParamStore, state: AdamState, names: list[str] | None = None):
    """One bias-corrected Adam update; zeroes the touched gradients afterwards.

    `names` restricts the update (and gradient reset) to a subset, which is how
    frozen namespaces stay bit-identical during later training stages.
    """
    if names is None:
        names = params.names()
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name in names:
        p = params[name]
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(f"non-finite gradient in parameter {name!r}")
        m, v = state.moments(name, p.data.shape, p.data.dtype)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = np.zeros_like(p.data)
