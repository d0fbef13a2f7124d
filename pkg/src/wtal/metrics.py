"""Evaluation: token-level AUC, severity accuracy/MAE/MSE, confusion
matrices and embedding heatmap exports."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError, UndefinedMetricError


def frame_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(s_pos > s_neg) + 0.5 P(s_pos = s_neg)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative tokens")
    ranks = rankdata(s)  # average ranks give ties half credit
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def severity_metrics(predictions, truths):
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predictions and truths must be non-empty and equally long")
    d = p - t
    return float(np.mean(d == 0)), float(np.mean(np.abs(d))), float(np.mean(d * d))


def confusion(predictions, truths, K) -> np.ndarray:
    """K x K counts; rows are the true class, columns the prediction."""
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truths, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError("predictions and truths differ in length")
    for name, arr in (("prediction", p), ("truth", t)):
        if arr.size and (arr.min() < 0 or arr.max() >= K):
            raise ConfigurationError(f"{name} class out of range [0, {K - 1}]")
    cm = np.zeros((K, K), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def density(embedding) -> float:
    return float(np.mean(np.abs(embedding)))


def write_pgm(path, matrix):
    """8-bit binary PGM, min-max normalized; a constant matrix maps to 0."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi > lo:
        img = np.round((m - lo) / (hi - lo) * 255.0)
    else:
        img = np.zeros_like(m)
    rows, cols = m.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode() + img.astype(np.uint8).tobytes())


def read_pgm(path):
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(rows, cols)


def export_heatmap(embedding, path, png=False) -> float:
    """Write ``<path>.csv`` and ``<path>.pgm`` and return the mean |E| density."""
    e = np.asarray(embedding, dtype=np.float64)
    if not np.all(np.isfinite(e)):
        raise ValueError("embedding contains non-finite values")
    path = Path(path)
    np.savetxt(path.with_suffix(".csv"), e, delimiter=",", fmt="%.17g")
    write_pgm(path.with_suffix(".pgm"), e)
    if png:
        from .plotting import plot_heatmap

        plot_heatmap(e, path.with_suffix(".png"), title=path.stem)
    return density(e)


def duration_aucs(scores: dict, masks: dict) -> dict:
    """Corpus AUC plus AUCs restricted to short- and long-burst positives.

    Negatives are every non-anomalous token in the corpus throughout.
    """
    s_all, y_all, kind_all = [], [], []
    for vid, s in scores.items():
        m = masks[vid]
        mask = np.asarray(m["mask"], dtype=bool)
        kind = np.zeros(mask.size, dtype=np.int64)
        for b in m.get("bursts", []):
            kind[b["start"]:b["start"] + b["length"]] = 1 if b["kind"] == "short" else 2
        s_all.append(np.asarray(s, dtype=np.float64))
        y_all.append(mask)
        kind_all.append(kind)
    s = np.concatenate(s_all)
    y = np.concatenate(y_all)
    kind = np.concatenate(kind_all)
    out = {"corpus": frame_auc(s, y)}
    for name, code in (("short", 1), ("long", 2)):
        keep = (~y) | (kind == code)
        try:
            out[name] = frame_auc(s[keep], (kind == code)[keep])
        except UndefinedMetricError:
            out[name] = None
    return out


@dataclass
class EvalReport:
    frame_auc: Optional[float]
    accuracy: Optional[float]
    mae: Optional[float]
    mse: Optional[float]
    confusion: Optional[np.ndarray]
    duration_auc: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def to_json(self):
        return {"frame_auc": self.frame_auc, "accuracy": self.accuracy, "mae": self.mae,
                "mse": self.mse,
                "confusion": None if self.confusion is None else self.confusion.tolist(),
                "duration_auc": self.duration_auc, "records": self.records}


def evaluate(predictor, seqs, masks=None, K=4, workers=1, heatmap_dir=None, png=False):
    """Score every sequence and aggregate the metrics into an EvalReport."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(predictor, seqs))
    records, scores = [], {}
    for seq, res in zip(seqs, results):
        rec = {"id": seq.id, "label": seq.label, "severity": seq.severity,
               "mean_score": float(res.scores.mean()), "density": density(res.embedding)}
        if heatmap_dir is not None:
            Path(heatmap_dir).mkdir(parents=True, exist_ok=True)
            export_heatmap(res.embedding, Path(heatmap_dir) / seq.id, png=png)
        if res.severity is not None:
            rec["predicted"] = res.severity.label
            rec["rank_probabilities"] = res.severity.probabilities.tolist()
        records.append(rec)
        scores[seq.id] = res.scores
    report = EvalReport(None, None, None, None, None, records=records)
    if masks is not None and all(s.id in masks for s in seqs):
        try:
            report.duration_auc = duration_aucs(scores, masks)
            report.frame_auc = report.duration_auc["corpus"]
        except UndefinedMetricError:
            pass
    labelled = [r for r in records if "predicted" in r and r["severity"] is not None]
    if labelled:
        preds = [r["predicted"] for r in labelled]
        truths = [r["severity"] for r in labelled]
        report.accuracy, report.mae, report.mse = severity_metrics(preds, truths)
        report.confusion = confusion(preds, truths, K)
    return report


def write_confusion_csv(path, cm):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth\\pred"] + [str(k) for k in range(len(cm))])
        for k, row in enumerate(cm):
            writer.writerow([str(k)] + [str(int(v)) for v in row])


def write_report(path, report: EvalReport):
    Path(path).write_text(json.dumps(report.to_json(), indent=1) + "\n")
