"""Cross-Temporal Scale Transformer.

A temporal feature pyramid: level 1 attends over all T tokens, each further
level halves the sequence by pair-averaging before its own attention
block. Every level is brought back to T tokens by nearest-neighbour
repetition and the levels are concatenated, giving T x (n*m) features.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError
from .nn import LayerNorm, Linear, as_batch
from .numerics import F, ParamSet, Tensor
from .oe import outlier_position_embedding


@dataclass
class CtstConfig:
    model_dim: int = 128
    levels: int = 3
    heads: int = 4
    ffn_dim: int = 0  # 0 means 4 * model_dim

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigurationError("CTST needs at least one level")
        if self.model_dim % self.heads:
            raise ConfigurationError(
                f"model_dim {self.model_dim} not divisible by {self.heads} heads")
        if self.model_dim % 2:
            raise ConfigurationError("model_dim must be even for the position embedding")
        if self.ffn_dim == 0:
            self.ffn_dim = 4 * self.model_dim

    @property
    def out_dim(self):
        return self.levels * self.model_dim

    def to_json(self):
        return asdict(self)


class AttentionBlock:
    """Pre-norm multi-head self-attention over time plus a feed-forward."""

    def __init__(self, params: ParamSet, name, m, heads, ffn_dim, rng):
        self.m, self.heads = m, heads
        self.ln1 = LayerNorm(params, f"{name}.ln1", m)
        self.q = Linear(params, f"{name}.q", m, m, rng)
        # a key bias shifts each logit row by a constant; softmax cancels it
        self.k = Linear(params, f"{name}.k", m, m, rng, bias=False)
        self.v = Linear(params, f"{name}.v", m, m, rng)
        self.o = Linear(params, f"{name}.o", m, m, rng)
        self.ln2 = LayerNorm(params, f"{name}.ln2", m)
        self.ff1 = Linear(params, f"{name}.ff1", m, ffn_dim, rng)
        self.ff2 = Linear(params, f"{name}.ff2", ffn_dim, m, rng)

    def _split(self, x, B, L):
        dh = self.m // self.heads
        return x.reshape(B, L, self.heads, dh).transpose(0, 2, 1, 3)

    def __call__(self, x, return_weights=False):
        B, L, m = x.shape
        h = self.ln1(x)
        q = self._split(self.q(h), B, L)
        k = self._split(self.k(h), B, L)
        v = self._split(self.v(h), B, L)
        scale = 1.0 / np.sqrt(m // self.heads)
        weights = F.softmax((q @ k.swapaxes(-1, -2)) * scale, axis=-1)
        ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(B, L, m)
        x = x + self.o(ctx)
        x = x + self.ff2(F.silu(self.ff1(self.ln2(x))))
        return (x, weights) if return_weights else x


def temporal_self_attention(tokens, block: AttentionBlock):
    """Run one block; returns ``(out, weights)`` with weights (B, heads, L, L)."""
    t, squeeze = as_batch(tokens)
    out, weights = block(t, return_weights=True)
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out, weights


def temporal_downsample(x):
    """Average consecutive token pairs; an odd last token passes through."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    L = x.shape[-2]
    if L == 1:
        return x
    half = L // 2
    lead = x.shape[:-2]
    pairs = x[..., :2 * half, :].reshape(lead + (half, 2, x.shape[-1])).mean(axis=-2)
    if L % 2:
        return F.concat([pairs, x[..., L - 1:, :]], axis=-2)
    return pairs


def upsample_index(L_in, T):
    if L_in > T:
        raise ValueError(f"cannot upsample {L_in} tokens to {T}")
    return (np.arange(T) * L_in) // T


def temporal_upsample(x, T):
    """Nearest-neighbour repeat: output row i is input row floor(i*L/T)."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    idx = upsample_index(x.shape[-2], T)
    if np.array_equal(idx, np.arange(T)):
        return x
    return x[..., idx, :]


def level_lengths(T, levels):
    out = [T]
    for _ in range(levels - 1):
        out.append((out[-1] + 1) // 2)
    return out


class CTST:
    def __init__(self, D, config: CtstConfig, rng, params=None, prefix="ctst"):
        self.D, self.config = D, config
        self.params = ParamSet() if params is None else params
        self.proj = Linear(self.params, f"{prefix}.proj", D, config.model_dim, rng)
        self.blocks = [AttentionBlock(self.params, f"{prefix}.level{i}", config.model_dim,
                                      config.heads, config.ffn_dim, rng)
                       for i in range(config.levels)]

    def __call__(self, x, e):
        return ctst_forward(x, e, self)


def ctst_forward(x, e, model: CTST):
    """Pyramid features for ``x`` (T x D or B x T x D) given outlier scores ``e``.

    ``e`` is treated as a constant: no gradient flows back into the embedder.
    """
    x, squeeze = as_batch(x)
    e = np.asarray(e.data if isinstance(e, Tensor) else e, dtype=np.float64)
    if e.ndim == 1:
        e = e[None]
    T = x.shape[1]
    if e.shape != x.shape[:2]:
        raise ConfigurationError(f"outlier scores shape {e.shape} does not match tokens {x.shape[:2]}")
    h = model.proj(x) + outlier_position_embedding(e, model.config.model_dim)
    outs = []
    for level, block in enumerate(model.blocks):
        if level > 0:
            h = temporal_downsample(h)
        h = block(h)
        outs.append(temporal_upsample(h, T))
    out = outs[0] if len(outs) == 1 else F.concat(outs, axis=-1)
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out
