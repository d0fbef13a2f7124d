"""Per-video feature files and temporal resampling.

File layout (little-endian)::

    offset 0   8 bytes  magic b"WTALFT01"
    offset 8   u32      T (rows, temporal segments)
    offset 12  u32      D (feature width)
    offset 16  u32      dtype tag, 0 = float32
    offset 20  T*D*4    float32 payload, row-major
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, FormatError

MAGIC = b"WTALFT01"
HEADER = struct.Struct("<8sIII")
DTYPE_F32 = 0

TYPICAL = "typical"
ATYPICAL = "atypical"
LABELS = (TYPICAL, ATYPICAL)
SPLITS = ("train", "test")


@dataclass
class FeatureSequence:
    id: str
    features: np.ndarray
    label: str = TYPICAL
    severity: Optional[int] = None
    split: str = "train"

    def __post_init__(self):
        f = np.asarray(self.features)
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise ConfigurationError(f"{self.id}: features must be T x D with T, D >= 1, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError(f"{self.id}: features contain non-finite values")
        if self.label not in LABELS:
            raise ConfigurationError(f"{self.id}: unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise ConfigurationError(f"{self.id}: unknown split {self.split!r}")
        if self.severity is not None:
            self.severity = int(self.severity)
            if (self.severity == 0) != (self.label == TYPICAL):
                raise ConfigurationError(
                    f"{self.id}: severity {self.severity} inconsistent with label {self.label}")
        self.features = f

    @property
    def is_typical(self):
        return self.label == TYPICAL

    @property
    def T(self):
        return self.features.shape[0]

    @property
    def D(self):
        return self.features.shape[1]


def encode_features(features) -> bytes:
    arr = np.asarray(features)
    if arr.ndim != 2:
        raise ConfigurationError(f"expected a 2-d feature matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite features")
    T, D = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, T, D, DTYPE_F32) + payload


def decode_features(buf: bytes) -> np.ndarray:
    if len(buf) < HEADER.size:
        if not MAGIC.startswith(bytes(buf[:len(MAGIC)])):
            raise FormatError("bad magic", offset=0)
        raise FormatError("truncated header", offset=len(buf))
    magic, T, D, tag = HEADER.unpack_from(buf, 0)
    if magic[:6] != MAGIC[:6]:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if magic != MAGIC:
        raise FormatError(f"unsupported format version {magic[6:]!r}", offset=6)
    if T < 1 or D < 1:
        raise FormatError(f"invalid shape {T}x{D}", offset=8)
    if tag != DTYPE_F32:
        raise FormatError(f"unsupported dtype tag {tag}", offset=16)
    expected = HEADER.size + T * D * 4
    if len(buf) < expected:
        raise FormatError(f"truncated payload: need {expected} bytes, have {len(buf)}", offset=len(buf))
    if len(buf) > expected:
        raise FormatError("trailing bytes after payload", offset=expected)
    return np.frombuffer(buf, dtype="<f4", count=T * D, offset=HEADER.size).reshape(T, D).copy()


def write_feature_file(path, seq) -> None:
    """Write ``seq`` (a FeatureSequence or a bare matrix) as float32."""
    features = seq.features if isinstance(seq, FeatureSequence) else seq
    Path(path).write_bytes(encode_features(features))


def load_feature_file(path, id=None, label=TYPICAL, severity=None, split="train") -> FeatureSequence:
    path = Path(path)
    features = decode_features(path.read_bytes())
    return FeatureSequence(id=id if id is not None else path.stem, features=features,
                           label=label, severity=severity, split=split)


def temporal_resample(raw, T_target: int) -> np.ndarray:
    """Average ``raw`` rows into ``T_target`` contiguous bins.

    Bin k covers rows floor(k*T_raw/T_target) .. floor((k+1)*T_raw/T_target)-1.
    Shorter inputs are padded by repeating the last row first.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < 1:
        raise ValueError(f"temporal_resample needs a non-empty T x D matrix, got {raw.shape}")
    if T_target < 1:
        raise ValueError("T_target must be >= 1")
    T_raw = raw.shape[0]
    if T_raw < T_target:
        raw = np.concatenate([raw, np.repeat(raw[-1:], T_target - T_raw, axis=0)])
        T_raw = T_target
    if T_raw == T_target:
        return raw.copy()
    bounds = (np.arange(T_target + 1) * T_raw) // T_target
    return np.stack([raw[bounds[k]:bounds[k + 1]].mean(axis=0) for k in range(T_target)])
