"""Per-token scoring head and the assembled weakly-supervised detector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctst import CTST, CtstConfig, ctst_forward
from .errors import ConfigurationError
from .nn import Linear, as_batch
from .numerics import F, ParamSet, Tensor, no_grad
from .oe import OutlierEmbedder, default_hidden, token_errors

EMBED_DIM = 128


@dataclass
class DetectorOutput:
    scores: Tensor  # (..., T), strictly inside (0, 1)
    embedding: Tensor  # (..., T, 128)


class DetectorHead:
    """Three fully connected layers: n*m -> 256 -> 128 -> 1, sigmoid output.

    The output layer starts at zero, so an untrained head scores every
    token 0.5.
    """

    def __init__(self, in_dim, rng, params=None, prefix="detector", hidden=256):
        self.in_dim = in_dim
        self.params = ParamSet() if params is None else params
        self.fc1 = Linear(self.params, f"{prefix}.fc1", in_dim, hidden, rng)
        self.fc2 = Linear(self.params, f"{prefix}.fc2", hidden, EMBED_DIM, rng)
        self.fc3 = Linear(self.params, f"{prefix}.fc3", EMBED_DIM, 1, rng, zero=True)

    def __call__(self, x):
        return detector_forward(x, self)


def detector_forward(x, head: DetectorHead) -> DetectorOutput:
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[-1] != head.in_dim:
        raise ConfigurationError(f"detector expects width {head.in_dim}, got {x.shape[-1]}")
    emb = F.silu(head.fc2(F.silu(head.fc1(x))))
    logit = head.fc3(emb)
    scores = F.sigmoid(logit.reshape(logit.shape[:-1]))
    return DetectorOutput(scores=scores, embedding=emb)


@dataclass
class DetectorConfig:
    D: int
    T: int = 32
    oe_hidden: int = 0  # 0 means min(256, D // 2)
    model_dim: int = 128
    levels: int = 3
    heads: int = 4
    ffn_dim: int = 0

    def __post_init__(self):
        if self.oe_hidden == 0:
            self.oe_hidden = default_hidden(self.D)
        self.ctst = CtstConfig(self.model_dim, self.levels, self.heads, self.ffn_dim)
        self.ffn_dim = self.ctst.ffn_dim

    def to_json(self):
        return {"kind": "detector", "D": self.D, "T": self.T, "oe_hidden": self.oe_hidden,
                "model_dim": self.model_dim, "levels": self.levels, "heads": self.heads,
                "ffn_dim": self.ffn_dim}

    @classmethod
    def from_json(cls, obj):
        obj = {k: v for k, v in obj.items() if k != "kind"}
        return cls(**obj)


class WeakDetector:
    """Standardize -> OE -> outlier position embedding -> CTST -> detector head.

    ``input.mean`` / ``input.std`` are fixed statistics (identity until
    :meth:`fit_input_stats`), stored with the weights but never trained.
    """

    BUFFERS = ("input.mean", "input.std")

    def __init__(self, config: DetectorConfig, rng):
        self.config = config
        self.params = ParamSet()
        self.input_mean = self.params.add("input.mean", np.zeros(config.D))
        self.input_std = self.params.add("input.std", np.ones(config.D))
        self.oe = OutlierEmbedder(config.D, config.oe_hidden, rng, params=ParamSet())
        self.ctst = CTST(config.D, config.ctst, rng, params=ParamSet())
        self.head = DetectorHead(config.ctst.out_dim, rng, params=ParamSet())
        for part in (self.oe, self.ctst, self.head):
            self.params.extend(part.params)

    def trainable(self) -> ParamSet:
        return self.params.subset([n for n in self.params if n not in self.BUFFERS])

    def fit_input_stats(self, tokens):
        """Set the standardization from an (N, D) stack of typical tokens."""
        tokens = np.asarray(tokens, dtype=np.float64).reshape(-1, self.config.D)
        std = tokens.std(axis=0)
        self.input_mean.data[...] = tokens.mean(axis=0)
        self.input_std.data[...] = np.where(std > 1e-8, std, 1.0)

    def standardize(self, x):
        x = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
        return (x - self.input_mean.data) / self.input_std.data

    def outlier_scores(self, x, standardized=False):
        x = x if standardized else self.standardize(x)
        with no_grad():
            recon = self.oe.reconstruct(Tensor(x))
        return token_errors(x, recon)

    def __call__(self, x) -> DetectorOutput:
        x, squeeze = as_batch(x)
        x = Tensor(self.standardize(x))
        e = self.outlier_scores(x.data, standardized=True)
        out = detector_forward(ctst_forward(x, e, self.ctst), self.head)
        if squeeze:
            out = DetectorOutput(out.scores.reshape(out.scores.shape[1:]),
                                 out.embedding.reshape(out.embedding.shape[1:]))
        return out
