"""Training objectives.

Scores are indexed along the last axis (tokens); leading axes index
typical/atypical video pairs. Typical is encoded 0, autistic 1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .errors import ConfigurationError, DataError
from .numerics import F, Tensor
from .numerics.tensor import _sigmoid
from .oe import reconstruction_loss

__all__ = [
    "LossConfig",
    "corn_loss",
    "corn_predict",
    "err",
    "pseudo_labels",
    "ranking_hinge",
    "reconstruction_loss",
    "self_rectifying_loss",
]


@dataclass
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    sref: Union[float, str] = 0.5  # a fixed threshold or "mean"
    mode: str = "diff"  # "diff" as printed, or "sum"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("loss weights must be non-negative")
        if isinstance(self.sref, str) and self.sref != "mean":
            try:
                self.sref = float(self.sref)
            except ValueError:
                raise ConfigurationError(f"S_ref must be a number or 'mean', got {self.sref!r}")
        if not isinstance(self.sref, str) and not 0.0 < self.sref < 1.0:
            raise ConfigurationError(f"fixed S_ref must lie in (0, 1), got {self.sref}")
        if self.mode not in ("diff", "sum"):
            raise ConfigurationError(f"unknown loss mode {self.mode!r}")

    def to_json(self):
        return asdict(self)


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def ranking_hinge(s_a, s_t):
    """max(0, 1 - sum(S_a) + sum(S_t)) per pair."""
    s_a, s_t = _t(s_a), _t(s_t)
    if s_a.shape != s_t.shape:
        raise ValueError(f"score shapes differ: {s_a.shape} vs {s_t.shape}")
    return F.relu(1.0 - s_a.sum(axis=-1) + s_t.sum(axis=-1))


def pseudo_labels(scores, sref=0.5):
    """1 where a score exceeds S_ref, else 0 (ties count as typical)."""
    s = np.asarray(scores.data if isinstance(scores, Tensor) else scores, dtype=np.float64)
    if sref == "mean":
        ref = s.mean(axis=-1, keepdims=True)
    else:
        ref = float(sref)
    return (s > ref).astype(np.float64)


def err(scores, kind, config: LossConfig = None):
    """Mean squared gap between scores and their (pseudo) labels."""
    config = LossConfig() if config is None else config
    s = _t(scores)
    if kind == "typical":
        return (s * s).mean(axis=-1)
    if kind == "autistic":
        r = s - pseudo_labels(s, config.sref)
        return (r * r).mean(axis=-1)
    raise ValueError(f"unknown kind {kind!r}")


def self_rectifying_loss(s_a, s_t, config: LossConfig = None):
    """Hinge ranking term plus the error-balancing term, averaged over pairs."""
    config = LossConfig() if config is None else config
    hinge = ranking_hinge(s_a, s_t)
    err_t = err(s_t, "typical", config)
    err_a = err(s_a, "autistic", config)
    if config.mode == "diff":
        balance = F.absolute(err_t - err_a)
    else:
        balance = err_t + err_a
    total = hinge * config.lambda1 + balance * config.lambda2
    return total.mean() if total.ndim else total


def corn_loss(logits, labels, K=None):
    """Conditional ordinal (CORN) loss over K-1 chained binary tasks.

    Task j (0-based) sees the samples with label >= j and asks whether the
    label exceeds j. Binary cross-entropy is summed over all included
    (sample, task) cells and divided by their count.
    """
    z = _t(logits)
    if z.ndim == 1:
        z = z.reshape(1, -1)
    y = np.atleast_1d(np.asarray(labels))
    n_tasks = z.shape[-1]
    K = n_tasks + 1 if K is None else K
    if K < 2 or n_tasks != K - 1:
        raise ConfigurationError(f"expected {K - 1} logits per sample, got {n_tasks}")
    if len(y) != z.shape[0] or len(y) == 0:
        raise DataError("corn_loss needs one label per sample and at least one sample")
    if np.any(y < 0) or np.any(y > K - 1) or np.any(y != np.round(y)):
        raise DataError(f"labels must be integers in [0, {K - 1}], got {sorted(set(y.tolist()))}")
    y = y.astype(np.int64)[:, None]
    tasks = np.arange(n_tasks)[None, :]
    included = (y >= tasks).astype(np.float64)
    target = (y > tasks).astype(np.float64)
    bce = F.softplus(z) - z * target
    return (bce * included).sum() * (1.0 / included.sum())


def corn_predict(logits):
    """Rank probabilities P(y > k) as running products of sigmoids, and the class.

    Returns ``(classes, probs)``; for one logit vector, ``class`` is an int.
    """
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
    probs = np.cumprod(_sigmoid(np.atleast_1d(z).astype(np.float64)), axis=-1)
    # cumprod of values in (0, 1] is monotone even in floating point
    classes = (probs > 0.5).sum(axis=-1)
    if z.ndim <= 1:
        return int(classes), probs
    return classes, probs
