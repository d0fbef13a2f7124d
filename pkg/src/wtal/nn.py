"""Layer helpers shared by the models. Weights live in a ParamSet."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .numerics import F, ParamSet, Tensor


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform((fan_in, fan_out)) - 1.0) * limit


class Linear:
    def __init__(self, params: ParamSet, name, fan_in, fan_out, rng, zero=False, bias=True):
        self.fan_in, self.fan_out = fan_in, fan_out
        w = np.zeros((fan_in, fan_out)) if zero else glorot(rng, fan_in, fan_out)
        self.weight = params.add(f"{name}.weight", w)
        self.bias = params.add(f"{name}.bias", np.zeros(fan_out)) if bias else None

    def __call__(self, x):
        if x.shape[-1] != self.fan_in:
            raise ConfigurationError(
                f"linear layer expects width {self.fan_in}, got {x.shape[-1]}")
        out = x @ self.weight
        return out if self.bias is None else out + self.bias


class LayerNorm:
    def __init__(self, params: ParamSet, name, width, eps=1e-5):
        self.eps = eps
        self.gain = params.add(f"{name}.gain", np.ones(width))
        self.bias = params.add(f"{name}.bias", np.zeros(width))

    def __call__(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        return xc / F.sqrt(var + self.eps) * self.gain + self.bias


def as_batch(x):
    """Promote a T x D input to a batch of one; return (tensor, squeezed?)."""
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 2:
        return t.reshape((1,) + t.shape), True
    return t, False
