"""Central finite-difference verification of analytic gradients.

Runs in 64-bit mode so the comparison is meaningful; callers build the
function and its parameter store under use_dtype(np.float64).
"""

from __future__ import annotations

import numpy as np

from .params import ParamStore
from .tensor import tape


def grad_check(fn, params: ParamStore, eps: float = 1e-5,
               names: list[str] | None = None) -> float:
    """Max relative error between analytic and (f(w+eps)-f(w-eps))/2eps gradients.

    fn maps the ParamStore to a scalar Tensor and must be deterministic.
    """
    for _, t in params.items():
        if t.data.dtype != np.float64:
            raise ValueError("grad_check requires a float64 ParamStore (see ParamStore.astype)")

    params.zero_grad()
    with tape() as tp:
        loss = fn(params)
    tp.backward(loss)
    analytic = {n: t.grad.copy() for n, t in params.items() if t.requires_grad}

    if names is None:
        names = [n for n, t in params.items() if t.requires_grad]
    worst = 0.0
    for name in names:
        w = params[name].data
        flat = w.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = fn(params).item()
            flat[i] = orig - eps
            f_minus = fn(params).item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst
