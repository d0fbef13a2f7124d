from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .params import ParamSet


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamSet, **hyper):
        state = cls(**hyper)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: ParamSet, state: AdamState):
    """Apply one bias-corrected Adam update in place.

    Gradients are read, never cleared; the caller zeroes them.
    """
    if set(state.m) != set(params.names()):
        raise ConfigurationError("Adam state does not cover the parameter set")
    for name, p in params.items():
        if state.m[name].shape != p.data.shape:
            raise ConfigurationError(
                f"{name}: Adam moment shape {state.m[name].shape} != {p.data.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
