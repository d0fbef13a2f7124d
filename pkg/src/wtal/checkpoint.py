"""Versioned binary checkpoints.

Layout (little-endian)::

    8 bytes   magic b"WTALCK01"
    u32       length of the JSON header in bytes
    header    canonical JSON: format_version, config, config_hash,
              provenance, params [{name, shape}]
    payload   float32 blobs, one per entry of ``params`` in header order

The header is serialized with sorted keys and no whitespace, so saving a
loaded checkpoint reproduces the original bytes.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError, FormatError

MAGIC = b"WTALCK01"
FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


@dataclass
class ModelCheckpoint:
    config: dict
    params: dict  # name -> float32 ndarray, insertion-ordered
    provenance: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        self.params = {k: np.array(v, dtype="<f4", order="C") for k, v in self.params.items()}

    @property
    def config_hash(self):
        return config_hash(self.config)

    @property
    def kind(self):
        return self.config.get("kind")

    def params_digest(self):
        h = hashlib.sha256()
        for name, arr in self.params.items():
            h.update(name.encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    def to_bytes(self) -> bytes:
        header = {
            "format_version": self.version,
            "config": self.config,
            "config_hash": self.config_hash,
            "provenance": self.provenance,
            "params": [{"name": k, "shape": list(v.shape)} for k, v in self.params.items()],
        }
        head = canonical_json(header).encode()
        blobs = b"".join(v.tobytes() for v in self.params.values())
        return MAGIC + struct.pack("<I", len(head)) + head + blobs

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ModelCheckpoint":
        if buf[:8] != MAGIC:
            raise FormatError("not a checkpoint (bad magic)", offset=0)
        if len(buf) < 12:
            raise FormatError("truncated checkpoint header", offset=len(buf))
        (n,) = struct.unpack_from("<I", buf, 8)
        if len(buf) < 12 + n:
            raise FormatError("truncated checkpoint header", offset=len(buf))
        try:
            header = json.loads(buf[12:12 + n].decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FormatError("corrupt checkpoint header", offset=12) from None
        if header.get("format_version") != FORMAT_VERSION:
            raise FormatError(f"unsupported checkpoint version {header.get('format_version')}",
                              offset=12)
        if config_hash(header["config"]) != header["config_hash"]:
            raise CheckpointError("checkpoint config hash does not match its config")
        offset = 12 + n
        params = {}
        for entry in header["params"]:
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            end = offset + 4 * count
            if end > len(buf):
                raise FormatError(f"truncated blob for {entry['name']}", offset=len(buf))
            params[entry["name"]] = np.frombuffer(buf, dtype="<f4", count=count,
                                                  offset=offset).reshape(entry["shape"]).copy()
            offset = end
        if offset != len(buf):
            raise FormatError("trailing bytes after parameter blobs", offset=offset)
        return cls(config=header["config"], params=params,
                   provenance=header["provenance"], version=header["format_version"])

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ModelCheckpoint":
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"checkpoint not found: {path}")
        return cls.from_bytes(path.read_bytes())


def from_params(config, params, provenance=None) -> ModelCheckpoint:
    """Snapshot a ParamSet (float64 in memory, float32 on disk)."""
    return ModelCheckpoint(config=config,
                           params={name: t.data for name, t in params.items()},
                           provenance=provenance or {})
