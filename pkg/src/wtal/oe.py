"""Outlier Embedder: a per-token bottleneck autoencoder fit on typical videos.

Its per-token reconstruction error marks tokens that stray from the typical
distribution; that error scales a sinusoidal position code, giving the
transformer an outlier-aware positional signal.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ContractError
from .nn import Linear, as_batch
from .numerics import F, AdamState, ParamSet, Tensor, adam_step


def default_hidden(D):
    return min(256, max(1, D // 2))


class OutlierEmbedder:
    def __init__(self, D, hidden=None, rng=None, params=None, prefix="oe"):
        hidden = default_hidden(D) if hidden is None else hidden
        if not 0 < hidden < D:
            raise ConfigurationError(f"OE hidden width must satisfy 0 < h < D (h={hidden}, D={D})")
        self.D, self.hidden = D, hidden
        self.params = ParamSet() if params is None else params
        self.encoder = Linear(self.params, f"{prefix}.encoder", D, hidden, rng)
        self.decoder = Linear(self.params, f"{prefix}.decoder", hidden, D, rng)

    def reconstruct(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.shape[-1] != self.D:
            raise ConfigurationError(f"OE expects feature width {self.D}, got {x.shape[-1]}")
        return self.decoder(F.silu(self.encoder(x)))

    def __call__(self, x):
        return oe_forward(x, self)


def token_errors(x, recon) -> np.ndarray:
    """Per-token mean squared reconstruction error, shape (..., T)."""
    x = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    r = recon.data if isinstance(recon, Tensor) else np.asarray(recon, dtype=np.float64)
    return ((x - r) ** 2).mean(axis=-1)


def oe_forward(x, model: OutlierEmbedder):
    """Return ``(F_R, e)``: the reconstruction and per-token outlier scores."""
    recon = model.reconstruct(x)
    return recon, token_errors(x, recon)


def reconstruction_loss(x, recon):
    """Squared Frobenius residual per item, averaged over the batch."""
    t, _ = as_batch(x)
    r, _ = as_batch(recon)
    diff = t - r
    return (diff * diff).sum() * (1.0 / t.shape[0])


def oe_train_step(batch, model: OutlierEmbedder, state: AdamState, checked=True):
    """One Adam step on the reconstruction loss of a typical-only batch."""
    if checked and hasattr(batch, "typical") and not np.all(batch.typical):
        bad = [i for i, t in zip(batch.ids, batch.typical) if not t]
        raise ContractError(f"OE training batch contains atypical videos: {bad}")
    x = batch.features if hasattr(batch, "features") else batch
    model.params.zero_grad()
    loss = reconstruction_loss(x, model.reconstruct(x))
    loss.backward()
    adam_step(model.params, state)
    return float(loss.data)


def sinusoidal_encoding(T, width):
    if width % 2:
        raise ConfigurationError(f"position embedding width must be even, got {width}")
    pos = np.arange(T, dtype=np.float64)[:, None]
    freq = 10000.0 ** (-np.arange(0, width, 2, dtype=np.float64) / width)
    pe = np.empty((T, width))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


def outlier_position_embedding(e, width):
    """Sinusoidal code of each token index scaled by 1 + e_i / mean(e).

    ``e`` is (T,) or (B, T); the mean is taken per sequence.
    """
    e = np.asarray(e, dtype=np.float64)
    if np.any(e < 0):
        raise ValueError("outlier scores must be non-negative")
    pe = sinusoidal_encoding(e.shape[-1], width)
    e_hat = e / (e.mean(axis=-1, keepdims=True) + 1e-8)
    return pe * (1.0 + e_hat)[..., None]
