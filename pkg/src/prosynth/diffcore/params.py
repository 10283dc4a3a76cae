"""Named parameter tensors with paired gradient slots.

Namespace prefixes (e.g. "enc/", "ref/", "sem/") identify parameter sets so
training stages can update or freeze whole subsystems by prefix.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def uniform_init(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


class ParamStore:
    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        t.zero_grad()
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def namespace(self, prefix: str) -> list[str]:
        return [n for n in self._params if n.startswith(prefix)]

    def zero_grad(self, prefix: str = ""):
        for name, t in self._params.items():
            if name.startswith(prefix):
                t.zero_grad()

    def set_trainable(self, prefix: str, trainable: bool):
        """Freeze or unfreeze a namespace; frozen params never receive gradients."""
        for name, t in self._params.items():
            if name.startswith(prefix):
                t.requires_grad = trainable

    def num_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, arr in state.items():
            if name in self._params:
                t = self._params[name]
                if t.data.shape != arr.shape:
                    raise ValueError(
                        f"shape mismatch loading {name!r}: have {t.data.shape}, got {arr.shape}"
                    )
                t.data = np.asarray(arr, dtype=t.data.dtype)
                t.zero_grad()
            else:
                self.add(name, arr)

    def astype(self, dtype) -> "ParamStore":
        """Copy of the store with converted dtype; used for 64-bit gradient checks."""
        out = ParamStore()
        for name, t in self._params.items():
            c = Tensor.__new__(Tensor)
            c.data = t.data.astype(dtype)
            c.grad = np.zeros_like(c.data)
            c.requires_grad = t.requires_grad
            c.name = name
            out._params[name] = c
        return out
