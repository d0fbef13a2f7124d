from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ConfigurationError
from .tensor import Tensor


def checked_matrix(data, name="matrix", ndim=2):
    """Return ``data`` as a float64 array, rejecting non-finite entries."""
    arr = np.asarray(data, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ConfigurationError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{name}: non-finite entry at index {tuple(int(i) for i in bad)}")
    return arr


class ParamSet:
    """Ordered, uniquely named trainable tensors."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name, value) -> Tensor:
        if name in self._entries:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._entries[name] = t
        return t

    def extend(self, other: "ParamSet"):
        for name, t in other.items():
            if name in self._entries:
                raise ConfigurationError(f"duplicate parameter name {name!r}")
            self._entries[name] = t

    def subset(self, names) -> "ParamSet":
        """A view sharing the same tensors, restricted to ``names``."""
        out = ParamSet()
        for name in names:
            out._entries[name] = self._entries[name]
        return out

    def __getitem__(self, name) -> Tensor:
        return self._entries[name]

    def __contains__(self, name):
        return name in self._entries

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def names(self):
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def zero_grad(self):
        for t in self._entries.values():
            t.grad.fill(0.0)

    def state_dict(self):
        return {name: t.data.copy() for name, t in self._entries.items()}

    def load_state_dict(self, state):
        missing = set(self._entries) - set(state)
        extra = set(state) - set(self._entries)
        if missing or extra:
            raise ConfigurationError(
                f"parameter mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, t in self._entries.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != t.data.shape:
                raise ConfigurationError(
                    f"{name}: shape {value.shape} does not match {t.data.shape}")
            t.data[...] = value

    def digest(self):
        """SHA-256 over names, shapes and raw float64 bytes."""
        h = hashlib.sha256()
        for name, t in self._entries.items():
            h.update(name.encode())
            h.update(str(t.data.shape).encode())
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return h.hexdigest()
