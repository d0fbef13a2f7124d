from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DataError, FormatError
from .features import LABELS, SPLITS, TYPICAL, FeatureSequence, load_feature_file, temporal_resample


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    label: str
    severity: Optional[int]
    split: str

    def to_json(self):
        return {"id": self.id, "path": self.path, "label": self.label,
                "severity": self.severity, "split": self.split}


class Manifest:
    """Immutable list of videos; relative paths resolve against ``root``."""

    def __init__(self, entries, root="."):
        self.entries = tuple(entries)
        self.root = Path(root)
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate manifest ids: {dup}")
        for e in self.entries:
            if e.label not in LABELS:
                raise DataError(f"{e.id}: unknown label {e.label!r}")
            if e.split not in SPLITS:
                raise DataError(f"{e.id}: unknown split {e.split!r}")
            if e.severity is not None and (e.severity == 0) != (e.label == TYPICAL):
                raise DataError(f"{e.id}: severity {e.severity} inconsistent with label {e.label}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def split(self, name):
        return [e for e in self.entries if e.split == name]

    def resolve(self, entry):
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def check_files(self):
        for e in self.entries:
            if not self.resolve(e).is_file():
                raise DataError(f"{e.id}: feature file not found: {self.resolve(e)}")

    def load(self, entry, T=None) -> FeatureSequence:
        seq = load_feature_file(self.resolve(entry), id=entry.id, label=entry.label,
                                severity=entry.severity, split=entry.split)
        if T is not None and seq.T != T:
            seq.features = temporal_resample(seq.features, T)
        return seq

    def sequences(self, split=None, T=None):
        entries = self.entries if split is None else self.split(split)
        return [self.load(e, T) for e in entries]

    def to_json(self):
        return [e.to_json() for e in self.entries]

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


def load_manifest(path, check_files=True) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid manifest JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(raw, list):
        raise FormatError(f"{path}: manifest must be a JSON array")
    entries = []
    for i, obj in enumerate(raw):
        try:
            severity = obj.get("severity")
            entries.append(ManifestEntry(id=str(obj["id"]), path=str(obj["path"]),
                                         label=obj["label"],
                                         severity=None if severity is None else int(severity),
                                         split=obj["split"]))
        except (KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"{path}: manifest entry {i} is malformed ({exc})") from None
    manifest = Manifest(entries, root=path.parent)
    if check_files:
        manifest.check_files()
    return manifest


def stack(seqs):
    return np.stack([s.features for s in seqs]).astype(np.float64)
