from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .features import FeatureSequence


@dataclass
class Batch:
    ids: list
    features: np.ndarray  # (B, T, D)
    typical: np.ndarray  # (B,) bool

    def __len__(self):
        return len(self.ids)


def _batch(seqs):
    return Batch(ids=[s.id for s in seqs],
                 features=np.stack([s.features for s in seqs]).astype(np.float64),
                 typical=np.array([s.is_typical for s in seqs]))


def _train_sequences(source):
    if hasattr(source, "sequences"):
        return source.sequences("train")
    return [s for s in source if s.split == "train"]


def make_batches(source, B, mode="random", rng=None):
    """Draw one (F_O, F_M) pair of batches from the training split.

    F_O holds ``B`` distinct typical sequences. In ``random`` mode F_M holds
    ``B`` distinct sequences from the whole split; in ``balanced`` mode it
    holds ``B`` typical followed by ``B`` atypical sequences, so every typical
    member has an atypical partner.
    """
    seqs = _train_sequences(source)
    typical = [s for s in seqs if s.is_typical]
    atypical = [s for s in seqs if not s.is_typical]
    if len(typical) < B:
        raise DataError(f"need at least {B} typical training videos, have {len(typical)}")
    f_o = [typical[i] for i in rng.choice(len(typical), B)]
    if mode == "random":
        if len(seqs) < B:
            raise DataError(f"need at least {B} training videos, have {len(seqs)}")
        f_m = [seqs[i] for i in rng.choice(len(seqs), B)]
    elif mode == "balanced":
        if len(atypical) < B:
            raise DataError(f"need at least {B} atypical training videos, have {len(atypical)}")
        f_m = ([typical[i] for i in rng.choice(len(typical), B)]
               + [atypical[i] for i in rng.choice(len(atypical), B)])
    else:
        raise ValueError(f"unknown batch mode {mode!r}")
    return _batch(f_o), _batch(f_m)


def epoch_batches(seqs: list[FeatureSequence], B, rng):
    """One pass over the atypical videos in chunks of at most ``B``.

    Each chunk is paired with as many typical videos drawn without
    replacement; F_O is an independent draw of the same size.
    Yields ``(F_O, F_M)`` with F_M laid out typical-first.
    """
    typical = [s for s in seqs if s.is_typical]
    atypical = [s for s in seqs if not s.is_typical]
    if not atypical:
        raise DataError("training split has no atypical videos; cannot form atypical scores")
    if not typical:
        raise DataError("training split has no typical videos")
    order = rng.permutation(len(atypical))
    n_steps = math.ceil(len(atypical) / B)
    for step in range(n_steps):
        chunk = [atypical[i] for i in order[step * B:(step + 1) * B]]
        k = min(len(chunk), len(typical))
        chunk = chunk[:k]
        f_o = [typical[i] for i in rng.choice(len(typical), k)]
        partners = [typical[i] for i in rng.choice(len(typical), k)]
        yield _batch(f_o), _batch(partners + chunk)
