"""Two-phase training and inference.

Phase 1 fits the Outlier Embedder on typical batches and, jointly, the
CTST + detector on typical/atypical pairs with the self-rectifying loss.
Phase 2 freezes that model and fits the severity regressor with the CORN
loss on its 128-wide embeddings.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .checkpoint import ModelCheckpoint, from_params
from .data import FeatureSequence, Manifest, epoch_batches, load_feature_file, temporal_resample
from .detector import DetectorConfig, WeakDetector
from .errors import CheckpointError, ConfigurationError, DataError
from .losses import LossConfig, corn_loss, self_rectifying_loss
from .numerics import AdamState, adam_step, no_grad, seeded_rng
from .oe import reconstruction_loss
from .regressor import RegressorConfig, SeverityPrediction, SeverityRegressor, predict_severity

log = logging.getLogger(__name__)

STREAM_DETECTOR_INIT = 1
STREAM_DETECTOR_BATCHES = 2
STREAM_REGRESSOR_INIT = 3
STREAM_REGRESSOR_BATCHES = 4


@dataclass
class TrainConfig:
    # phase 1
    lr: float = 0.001
    epochs: int = 4000
    batch_size: int = 8
    lambda1: float = 1.0
    lambda2: float = 1.0
    sref: Union[float, str] = 0.5
    loss_mode: str = "diff"
    freeze_oe: bool = False
    # phase 2
    reg_lr: float = 0.0001
    reg_epochs: int = 40
    reg_batch_size: int = 4
    # architecture
    T: int = 32
    K: int = 4
    model_dim: int = 128
    levels: int = 3
    heads: int = 4
    oe_hidden: int = 0
    tcn_channels: list = field(default_factory=lambda: [512, 256, 128])
    mlp_hidden: list = field(default_factory=lambda: [128, 64])
    seed: int = 0

    def __post_init__(self):
        for name in ("lr", "reg_lr"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("epochs", "reg_epochs", "batch_size", "reg_batch_size", "T"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        self.loss_config()

    def loss_config(self):
        return LossConfig(self.lambda1, self.lambda2, self.sref, self.loss_mode)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**obj)


PRESETS = {
    "paper": {},
    "desk": {"epochs": 300, "model_dim": 64, "batch_size": 8, "reg_batch_size": 4},
}


def preset_config(name="paper", **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}")
    return TrainConfig(**{**PRESETS[name], **overrides})


def _sequences(source, split, T):
    if isinstance(source, Manifest):
        return source.sequences(split, T=T)
    seqs = [s for s in source if split is None or s.split == split]
    out = []
    for s in seqs:
        f = s.features if s.T == T else temporal_resample(s.features, T)
        out.append(FeatureSequence(s.id, f, s.label, s.severity, s.split))
    return out


def detector_config(cfg: TrainConfig, D) -> DetectorConfig:
    return DetectorConfig(D=D, T=cfg.T, oe_hidden=cfg.oe_hidden, model_dim=cfg.model_dim,
                          levels=cfg.levels, heads=cfg.heads)


def build_detector(cfg: TrainConfig, D) -> WeakDetector:
    return WeakDetector(detector_config(cfg, D), seeded_rng(cfg.seed, STREAM_DETECTOR_INIT))


def detector_from_checkpoint(ckpt: ModelCheckpoint) -> WeakDetector:
    if ckpt.kind != "detector":
        raise CheckpointError(f"expected a detector checkpoint, got {ckpt.kind!r}")
    model = WeakDetector(DetectorConfig.from_json(ckpt.config), seeded_rng(0))
    model.params.load_state_dict(ckpt.params)
    return model


def regressor_from_checkpoint(ckpt: ModelCheckpoint, detector_ckpt: ModelCheckpoint):
    if ckpt.kind != "regressor":
        raise CheckpointError(f"expected a regressor checkpoint, got {ckpt.kind!r}")
    expected = ckpt.config.get("detector_config_hash")
    if expected != detector_ckpt.config_hash:
        raise CheckpointError(
            f"regressor was trained on detector config {expected}, "
            f"got {detector_ckpt.config_hash}")
    arch = {k: v for k, v in ckpt.config.items() if k != "detector_config_hash"}
    model = SeverityRegressor(RegressorConfig.from_json(arch), seeded_rng(0))
    model.params.load_state_dict(ckpt.params)
    return model


def _tail(history, n=10):
    return [{k: v for k, v in row.items()} for row in history[-n:]]


def train_detector(source, cfg: TrainConfig, history_path=None):
    """Phase 1. Returns ``(checkpoint, history)``.

    ``history`` has one row per optimizer step with the reconstruction,
    detector and total losses.
    """
    seqs = _sequences(source, "train", cfg.T)
    if not any(not s.is_typical for s in seqs):
        raise DataError("no atypical training videos; cannot form atypical scores")
    if not any(s.is_typical for s in seqs):
        raise DataError("no typical training videos")
    D = seqs[0].D
    model = build_detector(cfg, D)
    loss_cfg = cfg.loss_config()
    model.fit_input_stats(np.concatenate([s.features for s in seqs if s.is_typical]))
    trainable = model.trainable()
    if cfg.freeze_oe:
        oe_names = set(model.oe.params.names())
        trainable = trainable.subset([n for n in trainable if n not in oe_names])
    state = AdamState.for_params(trainable, lr=cfg.lr)
    rng = seeded_rng(cfg.seed, STREAM_DETECTOR_BATCHES)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        for f_o, f_m in epoch_batches(seqs, cfg.batch_size, rng):
            trainable.zero_grad()
            k = len(f_o)
            out = model(f_m.features)
            loss_d = self_rectifying_loss(out.scores[k:], out.scores[:k], loss_cfg)
            if cfg.freeze_oe:
                total = loss_d
                recon = 0.0
            else:
                x_o = model.standardize(f_o.features)
                loss_r = reconstruction_loss(x_o, model.oe.reconstruct(x_o))
                total = loss_r + loss_d
                recon = float(loss_r.data)
            total.backward()
            adam_step(trainable, state)
            history.append({"epoch": epoch, "step": step, "recon": recon,
                            "detector": float(loss_d.data), "total": float(total.data)})
            step += 1
        if (epoch + 1) % max(1, cfg.epochs // 10) == 0:
            log.info("detector epoch %d/%d total %.5f", epoch + 1, cfg.epochs, history[-1]["total"])
    provenance = {"phase": "detector", "seed": cfg.seed, "epochs": cfg.epochs,
                  "steps": step, "train_config": cfg.to_json(),
                  "loss_history_tail": _tail(history)}
    ckpt = from_params(model.config.to_json(), model.params, provenance)
    if history_path is not None:
        write_history(history_path, history)
    return ckpt, history


def embed(model: WeakDetector, features):
    """Detector scores (N, T) and embeddings (N, T, 128) without recording a graph."""
    with no_grad():
        out = model(np.asarray(features, dtype=np.float64))
    return out.scores.data, out.embedding.data


def train_regressor(source, detector_ckpt: ModelCheckpoint, cfg: TrainConfig, history_path=None):
    """Phase 2 on a frozen detector. Returns ``(checkpoint, history)``."""
    seqs = _sequences(source, "train", cfg.T)
    missing = [s.id for s in seqs if s.severity is None]
    if missing:
        raise DataError(f"training videos without severity labels: {missing[:5]}")
    detector = detector_from_checkpoint(detector_ckpt)
    before = detector.params.digest()
    x = np.stack([s.features for s in seqs]).astype(np.float64)
    y = np.array([s.severity for s in seqs])
    _, emb = embed(detector, x)
    K = cfg.K
    if np.any(y >= K):
        raise DataError(f"severity labels exceed K-1={K - 1}")
    rcfg = RegressorConfig(D=x.shape[-1], K=K, T=cfg.T, tcn_channels=cfg.tcn_channels,
                           mlp_hidden=cfg.mlp_hidden)
    model = SeverityRegressor(rcfg, seeded_rng(cfg.seed, STREAM_REGRESSOR_INIT))
    model.fit_input_stats(x, emb)
    trainable = model.trainable()
    state = AdamState.for_params(trainable, lr=cfg.reg_lr)
    rng = seeded_rng(cfg.seed, STREAM_REGRESSOR_BATCHES)
    history = []
    step = 0
    B = cfg.reg_batch_size
    for epoch in range(cfg.reg_epochs):
        order = rng.permutation(len(seqs))
        for i in range(math.ceil(len(order) / B)):
            idx = order[i * B:(i + 1) * B]
            trainable.zero_grad()
            logits = model(x[idx], emb[idx])
            loss = corn_loss(logits, y[idx], K)
            loss.backward()
            adam_step(trainable, state)
            history.append({"epoch": epoch, "step": step, "corn": float(loss.data)})
            step += 1
    if detector.params.digest() != before:
        raise RuntimeError("detector parameters changed during regressor training")
    config = {**rcfg.to_json(), "detector_config_hash": detector_ckpt.config_hash}
    provenance = {"phase": "regressor", "seed": cfg.seed, "epochs": cfg.reg_epochs,
                  "steps": step, "train_config": cfg.to_json(),
                  "detector_params_sha256": detector_ckpt.params_digest(),
                  "loss_history_tail": _tail(history)}
    ckpt = from_params(config, model.params, provenance)
    if history_path is not None:
        write_history(history_path, history)
    return ckpt, history


def epoch_means(history, key):
    epochs = sorted({row["epoch"] for row in history})
    return [float(np.mean([r[key] for r in history if r["epoch"] == e])) for e in epochs]


def write_history(path, history):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(history[0]))
        writer.writeheader()
        for row in history:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


@dataclass
class InferenceResult:
    id: str
    scores: np.ndarray  # (T,)
    embedding: np.ndarray  # (T, 128)
    severity: Optional[SeverityPrediction] = None

    def to_json(self):
        out = {"id": self.id, "scores": self.scores.tolist(),
               "mean_score": float(self.scores.mean()),
               "density": float(np.abs(self.embedding).mean())}
        if self.severity is not None:
            out["severity"] = self.severity.to_json()
        return out


class Predictor:
    """Frozen detector (and optional regressor) for repeated inference."""

    def __init__(self, detector_ckpt: ModelCheckpoint, regressor_ckpt: ModelCheckpoint = None):
        self.detector_ckpt = detector_ckpt
        self.detector = detector_from_checkpoint(detector_ckpt)
        self.regressor = (regressor_from_checkpoint(regressor_ckpt, detector_ckpt)
                          if regressor_ckpt is not None else None)
        self.T = self.detector.config.T

    def prepare(self, features):
        f = np.asarray(features, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != self.detector.config.D:
            raise ConfigurationError(
                f"features must be T x {self.detector.config.D}, got {f.shape}")
        return f if f.shape[0] == self.T else temporal_resample(f, self.T)

    def __call__(self, seq) -> InferenceResult:
        if isinstance(seq, (str, Path)):
            seq = load_feature_file(seq)
        f = self.prepare(seq.features)
        scores, emb = embed(self.detector, f[None])
        severity = None
        if self.regressor is not None:
            with no_grad():
                logits = self.regressor(f, emb[0])
            severity = predict_severity(logits)
        return InferenceResult(seq.id, scores[0], emb[0], severity)


def infer(seq, detector_ckpt, regressor_ckpt=None) -> InferenceResult:
    return Predictor(detector_ckpt, regressor_ckpt)(seq)
