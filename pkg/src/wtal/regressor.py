"""Severity head: temporal convolutions over visual features, fused with the
frozen detector embedding, a per-token MLP, then max-pooling over time into
K-1 CORN logits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detector import EMBED_DIM
from .errors import ConfigurationError
from .losses import corn_predict
from .nn import Linear, as_batch, glorot
from .numerics import F, ParamSet, Tensor


@dataclass
class RegressorConfig:
    D: int
    K: int = 4
    T: int = 32
    tcn_channels: list = field(default_factory=lambda: [512, 256, 128])
    mlp_hidden: list = field(default_factory=lambda: [128, 64])

    def __post_init__(self):
        if self.K < 2:
            raise ConfigurationError("need at least two severity classes")
        self.tcn_channels = [int(c) for c in self.tcn_channels]
        self.mlp_hidden = [int(c) for c in self.mlp_hidden]

    def to_json(self):
        return {"kind": "regressor", "D": self.D, "K": self.K, "T": self.T,
                "tcn_channels": self.tcn_channels, "mlp_hidden": self.mlp_hidden}

    @classmethod
    def from_json(cls, obj):
        return cls(**{k: v for k, v in obj.items() if k != "kind"})


@dataclass
class SeverityPrediction:
    label: int
    probabilities: np.ndarray  # P(y > k), k = 0..K-2, non-increasing
    logits: np.ndarray

    def to_json(self):
        return {"class": self.label, "rank_probabilities": self.probabilities.tolist(),
                "logits": self.logits.tolist()}


class TcnLayer:
    """Kernel-3 temporal convolution, zero padded to keep length, then SiLU."""

    def __init__(self, params: ParamSet, name, c_in, c_out, rng):
        self.c_in, self.c_out = c_in, c_out
        w = glorot(rng, 3 * c_in, c_out).reshape(3, c_in, c_out)
        self.kernel = params.add(f"{name}.kernel", w)  # taps for t-1, t, t+1
        self.bias = params.add(f"{name}.bias", np.zeros(c_out))

    def __call__(self, x):
        return tcn_layer(x, self)


def tcn_layer(x, layer: TcnLayer):
    x, squeeze = as_batch(x)
    B, T, C = x.shape
    if C != layer.c_in:
        raise ConfigurationError(f"TCN layer expects {layer.c_in} channels, got {C}")
    pad = Tensor(np.zeros((B, 1, C)))
    xp = F.concat([pad, x, pad], axis=1)
    cols = F.concat([xp[:, 0:T, :], xp[:, 1:T + 1, :], xp[:, 2:T + 2, :]], axis=-1)
    out = F.silu(cols @ layer.kernel.reshape(3 * C, layer.c_out) + layer.bias)
    return out.reshape(out.shape[1:]) if squeeze else out


class SeverityRegressor:
    """``input.*`` and ``embed.*`` standardize the visual features and the
    detector embedding; they are fit once from training tokens and excluded
    from optimization."""

    BUFFERS = ("input.mean", "input.std", "embed.mean", "embed.std")

    def __init__(self, config: RegressorConfig, rng, prefix="regressor"):
        self.config = config
        self.params = ParamSet()
        self.input_mean = self.params.add("input.mean", np.zeros(config.D))
        self.input_std = self.params.add("input.std", np.ones(config.D))
        self.embed_mean = self.params.add("embed.mean", np.zeros(EMBED_DIM))
        self.embed_std = self.params.add("embed.std", np.ones(EMBED_DIM))
        widths = [config.D] + config.tcn_channels
        self.tcn = [TcnLayer(self.params, f"{prefix}.tcn{i}", a, b, rng)
                    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:]))]
        dims = [widths[-1] + EMBED_DIM] + config.mlp_hidden + [config.K - 1]
        self.mlp = [Linear(self.params, f"{prefix}.mlp{i}", a, b, rng)
                    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]

    def trainable(self) -> ParamSet:
        return self.params.subset([n for n in self.params if n not in self.BUFFERS])

    def fit_input_stats(self, tokens, embeddings):
        for arr, mean, std in ((tokens, self.input_mean, self.input_std),
                               (embeddings, self.embed_mean, self.embed_std)):
            flat = np.asarray(arr, dtype=np.float64).reshape(-1, mean.data.size)
            sd = flat.std(axis=0)
            mean.data[...] = flat.mean(axis=0)
            std.data[...] = np.where(sd > 1e-8, sd, 1.0)

    def token_logits(self, x, emb):
        x, _ = as_batch(x)
        x = (x - self.input_mean.data) / self.input_std.data
        emb, _ = as_batch(emb)
        emb = (emb - self.embed_mean.data) / self.embed_std.data
        if emb.shape[:2] != x.shape[:2] or emb.shape[-1] != EMBED_DIM:
            raise ConfigurationError(
                f"embedding shape {emb.shape} incompatible with features {x.shape}")
        h = x
        for layer in self.tcn:
            h = layer(h)
        z = F.concat([h, emb], axis=-1)
        for i, layer in enumerate(self.mlp):
            z = layer(z)
            if i < len(self.mlp) - 1:
                z = F.silu(z)
        return z

    def __call__(self, x, emb):
        return regressor_forward(x, emb, self)


def regressor_forward(x, emb, model: SeverityRegressor):
    """Video-level logits: per-token logits max-pooled over time."""
    squeeze = (x.ndim if isinstance(x, Tensor) else np.ndim(x)) == 2
    logits = F.amax(model.token_logits(x, emb), axis=-2)
    return logits.reshape(logits.shape[1:]) if squeeze else logits


def predict_severity(logits) -> SeverityPrediction:
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
    label, probs = corn_predict(z)
    return SeverityPrediction(label=label, probabilities=probs, logits=z.copy())
