"""Synthetic untrimmed feature sequences with planted atypical bursts.

Typical tokens follow a per-video slowly drifting base plus white noise.
Atypical tokens add a fixed shift on a dataset-wide subset of D/4 dims.
Severity level sets the anomalous-token budget: level 0 none, higher
levels progressively more, laid out as short (1-2 token) and long
(8-16 token) bursts separated by at least one typical token.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..numerics import seeded_rng
from .features import ATYPICAL, TYPICAL, FeatureSequence, write_feature_file
from .manifest import Manifest, ManifestEntry

_DIMS_STREAM = 0xD1A5
_LAYOUT_TRIES = 64


@dataclass
class SynthConfig:
    n_train: list = field(default_factory=lambda: [20, 20, 20, 20])
    n_test: list = field(default_factory=lambda: [5, 5, 5, 5])
    T: int = 32
    D: int = 64
    mu: float = 1.0
    sigma: float = 0.1
    short_len: tuple = (1, 2)
    long_len: tuple = (8, 16)
    budgets: list = field(default_factory=lambda: [(0, 0), (1, 2), (4, 8), (12, 20)])
    long_prob: float = 0.5
    base_scale: float = 0.1
    walk_scale: float = 0.02
    seed: int = 7

    def __post_init__(self):
        K = len(self.budgets)
        if isinstance(self.n_train, int):
            self.n_train = [self.n_train] * K
        if isinstance(self.n_test, int):
            self.n_test = [self.n_test] * K
        self.n_train = [int(n) for n in self.n_train]
        self.n_test = [int(n) for n in self.n_test]
        self.budgets = [tuple(int(x) for x in b) for b in self.budgets]
        self.short_len = tuple(int(x) for x in self.short_len)
        self.long_len = tuple(int(x) for x in self.long_len)
        self.validate()

    @property
    def K(self):
        return len(self.budgets)

    def validate(self):
        if self.T < 1 or self.D < 1:
            raise ConfigurationError("T and D must be >= 1")
        if len(self.n_train) != self.K or len(self.n_test) != self.K:
            raise ConfigurationError("n_train / n_test need one count per severity level")
        if self.budgets[0] != (0, 0):
            raise ConfigurationError("level 0 must have an empty anomaly budget")
        prev_hi = 0
        for level, (lo, hi) in enumerate(self.budgets):
            if lo > hi or lo < 0:
                raise ConfigurationError(f"level {level}: invalid budget ({lo}, {hi})")
            if hi > self.T:
                raise ConfigurationError(f"level {level}: budget {hi} exceeds T={self.T}")
            if level > 0 and lo <= prev_hi:
                raise ConfigurationError(
                    f"level {level}: budget ({lo}, {hi}) overlaps or undercuts level {level - 1}")
            prev_hi = hi
        if self.short_len[0] < 1 or self.short_len[1] >= self.long_len[0]:
            raise ConfigurationError("short bursts must be shorter than long bursts")

    def to_json(self):
        return asdict(self)


@dataclass
class Burst:
    start: int
    length: int
    kind: str  # "short" | "long"


def shifted_dims(cfg: SynthConfig):
    k = math.ceil(cfg.D / 4)
    return np.sort(seeded_rng(cfg.seed, _DIMS_STREAM).choice(cfg.D, k))


def _burst_lengths(budget, lo_budget, cfg, rng):
    lengths, rem = [], budget
    need_long = lo_budget >= cfg.long_len[0]
    while rem > 0:
        take_long = rem >= cfg.long_len[0] and (need_long or rng.uniform() < cfg.long_prob)
        if take_long:
            n = rng.integers(cfg.long_len[0], min(cfg.long_len[1], rem))
            need_long = False
        else:
            n = min(rng.integers(*cfg.short_len), rem)
        lengths.append(int(n))
        rem -= n
    return lengths


def layout_bursts(level, cfg: SynthConfig, rng) -> list[Burst]:
    lo, hi = cfg.budgets[level]
    if hi == 0:
        return []
    for _ in range(_LAYOUT_TRIES):
        budget = rng.integers(lo, hi)
        lengths = _burst_lengths(budget, lo, cfg, rng)
        lengths = [lengths[i] for i in rng.permutation(len(lengths))]
        nb = len(lengths)
        free = cfg.T - sum(lengths) - (nb - 1)
        if free < 0:
            continue
        cuts = np.sort(rng.integers(0, free, size=nb))
        bursts, pos = [], int(cuts[0])
        for i, n in enumerate(lengths):
            if i > 0:
                pos += 1 + int(cuts[i] - cuts[i - 1])
            kind = "long" if n >= cfg.long_len[0] else "short"
            bursts.append(Burst(pos, n, kind))
            pos += n
        return bursts
    raise ConfigurationError(f"level {level}: could not fit bursts into T={cfg.T}")


def synth_video(level, index, cfg: SynthConfig, dims):
    """Features (T x D float32), 0/1 mask and bursts for one video."""
    rng = seeded_rng(cfg.seed, (level << 32) | index)
    base0 = rng.normal(cfg.D, scale=cfg.base_scale)
    walk = np.cumsum(rng.normal((cfg.T, cfg.D), scale=cfg.walk_scale), axis=0)
    x = base0 + walk + rng.normal((cfg.T, cfg.D), scale=cfg.sigma)
    bursts = layout_bursts(level, cfg, rng)
    mask = np.zeros(cfg.T, dtype=np.int64)
    for b in bursts:
        mask[b.start:b.start + b.length] = 1
    x[np.ix_(mask.astype(bool), dims)] += cfg.mu
    return x.astype(np.float32), mask, bursts


def synth_dataset(cfg: SynthConfig, out_dir=None):
    """Generate the dataset; with ``out_dir`` also write it to disk.

    Returns ``(manifest, sequences, masks)`` where ``masks`` maps video id to
    ``{"id", "mask", "bursts"}``.
    """
    cfg.validate()
    dims = shifted_dims(cfg)
    entries, seqs, masks = [], [], {}
    for level in range(cfg.K):
        label = TYPICAL if level == 0 else ATYPICAL
        counts = (("train", cfg.n_train[level]), ("test", cfg.n_test[level]))
        index = 0
        for split, count in counts:
            for _ in range(count):
                vid = f"L{level}_{split}_{index:03d}"
                x, mask, bursts = synth_video(level, index, cfg, dims)
                index += 1
                seqs.append(FeatureSequence(vid, x, label=label, severity=level, split=split))
                entries.append(ManifestEntry(vid, f"features/{vid}.feat", label, level, split))
                masks[vid] = {"id": vid, "mask": mask.tolist(),
                              "bursts": [asdict(b) for b in bursts]}
    manifest = Manifest(entries, root=out_dir if out_dir is not None else ".")
    if out_dir is not None:
        write_dataset(out_dir, cfg, manifest, seqs, masks)
    return manifest, seqs, masks


def write_dataset(out_dir, cfg, manifest, seqs, masks):
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    for entry, seq in zip(manifest, seqs):
        write_feature_file(out / entry.path, seq)
        (out / "masks" / f"{seq.id}.json").write_text(json.dumps(masks[seq.id]) + "\n")
    manifest.save(out / "manifest.json")
    (out / "synth_config.json").write_text(json.dumps(cfg.to_json(), indent=1) + "\n")


def load_masks(directory, ids=None):
    directory = Path(directory)
    out = {}
    paths = ([directory / f"{i}.json" for i in ids] if ids is not None
             else sorted(directory.glob("*.json")))
    for p in paths:
        obj = json.loads(p.read_text())
        out[obj["id"]] = obj
    return out
