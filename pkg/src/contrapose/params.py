"""Named parameter storage shared by both encoders and the fine-tuning head.

A ParamStore maps unique names to parameter Tensors (each with a trainable
flag mirrored into ``Tensor.requires_grad``) plus non-trainable numpy buffers
(batch-norm running statistics). Iteration is always lexicographic by name so
optimizer updates, checkpoints and momentum mixing are order-deterministic.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class ParamStore:
    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}
        self._buffers: dict[str, np.ndarray] = {}

    # -- construction -------------------------------------------------------
    def add_param(self, name: str, value: np.ndarray, trainable: bool = True):
        if name in self._params or name in self._buffers:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(value), requires_grad=trainable)
        self._params[name] = t
        self._trainable[name] = bool(trainable)
        return t

    def add_buffer(self, name: str, value: np.ndarray):
        if name in self._params or name in self._buffers:
            raise ValueError(f"duplicate buffer name: {name}")
        self._buffers[name] = np.asarray(value)
        return self._buffers[name]

    # -- access --------------------------------------------------------------
    def __contains__(self, name):
        return name in self._params or name in self._buffers

    def param(self, name: str) -> Tensor:
        return self._params[name]

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def names(self):
        return sorted(self._params)

    def buffer_names(self):
        return sorted(self._buffers)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def trainable_items(self):
        for name in self.names():
            if self._trainable[name]:
                yield name, self._params[name]

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_trainable(self, name: str, flag: bool):
        self._trainable[name] = bool(flag)
        self._params[name].requires_grad = bool(flag)

    # -- bulk ops -------------------------------------------------------------
    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def clone(self, trainable: bool | None = None) -> "ParamStore":
        """Deep copy; ``trainable`` overrides every flag when given."""
        out = ParamStore()
        for name in self.names():
            flag = self._trainable[name] if trainable is None else trainable
            out.add_param(name, self._params[name].data.copy(), flag)
        for name in self.buffer_names():
            out.add_buffer(name, self._buffers[name].copy())
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Params and buffers merged, keyed by name (for serialization)."""
        merged = {n: t.data for n, t in self._params.items()}
        merged.update(self._buffers)
        return dict(sorted(merged.items()))
