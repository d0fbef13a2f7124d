"""PNG figures written next to the CSV/JSON outputs (headless Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_heatmap(matrix, path, title=None):
    m = np.asarray(matrix, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 3))
    im = ax.imshow(m.T, aspect="auto", cmap="magma", interpolation="nearest")
    ax.set_xlabel("token")
    ax.set_ylabel("channel")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    _save(fig, path)


def plot_confusion(cm, path):
    cm = np.asarray(cm)
    K = cm.shape[0]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(cm, cmap="Blues")
    for i in range(K):
        for j in range(K):
            ax.text(j, i, str(int(cm[i, j])), ha="center", va="center")
    ax.set_xticks(range(K))
    ax.set_yticks(range(K))
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    _save(fig, path)


def plot_loss_curves(rows, path, keys=None):
    """Per-epoch means of each loss column in ``rows`` (dicts with an ``epoch`` key)."""
    if not rows:
        return
    keys = keys or [k for k in rows[0] if k not in ("epoch", "step")]
    epochs = sorted({int(r["epoch"]) for r in rows})
    fig, ax = plt.subplots(figsize=(5, 3))
    for k in keys:
        means = [np.mean([float(r[k]) for r in rows if int(r["epoch"]) == e]) for e in epochs]
        ax.plot(epochs, means, label=k)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    _save(fig, path)


def plot_scores(scores, mask, path, title=None):
    s = np.asarray(scores, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 2.5))
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        ax.fill_between(np.arange(s.size), 0, 1, where=m, step="mid", alpha=0.2, color="red")
    ax.step(np.arange(s.size), s, where="mid")
    ax.set_ylim(0, 1)
    ax.set_xlabel("token")
    ax.set_ylabel("score")
    if title:
        ax.set_title(title)
    _save(fig, path)
