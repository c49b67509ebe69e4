"""Matplotlib renderings of evaluation and corpus reports, written straight to files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .corpus import LengthStats  # noqa: E402
from .evaluation import ConfusionMatrix  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
    # stable bytes for identical inputs
    "svg.hashsalt": "snipclass",
    "pdf.compression": 0,
}


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    # drop timestamps/version stamps so reruns are byte-identical
    metadata = {".png": {"Software": None}, ".svg": {"Date": None},
                ".pdf": {"CreationDate": None}}.get(path.suffix.lower())
    fig.savefig(path, bbox_inches="tight", metadata=metadata)
    plt.close(fig)


def plot_confusion(matrix: ConfusionMatrix, path: str | Path, normalize: bool = True,
                   title: str | None = None) -> None:
    """Heat map of the confusion matrix; rows normalized to recall when `normalize`."""
    counts = matrix.counts.astype(float)
    if normalize:
        rows = counts.sum(axis=1, keepdims=True)
        values = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    else:
        values = counts
    n = len(matrix.labels)
    size = max(3.5, 0.42 * n + 1.5)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(size, size))
        im = ax.imshow(values, cmap="Blues", vmin=0, vmax=1 if normalize else None)
        ax.set_xticks(range(n))
        ax.set_yticks(range(n))
        ax.set_xticklabels(matrix.labels, rotation=90)
        ax.set_yticklabels(matrix.labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("gold")
        if title:
            ax.set_title(title)
        if n <= 25:
            thresh = values.max() / 2 if values.size else 0
            for i in range(n):
                for j in range(n):
                    text = f"{values[i, j]:.2f}" if normalize else f"{int(values[i, j])}"
                    ax.text(j, i, text, ha="center", va="center", fontsize=6 if n > 10 else 8,
                            color="white" if values[i, j] > thresh else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        _save(fig, path)


def plot_lengths(stats: LengthStats, path: str | Path) -> None:
    """Bar charts of mean snippet length per language, in lines and in characters."""
    labels = list(stats.per_language)
    lines = [stats.per_language[lab].mean_lines for lab in labels]
    chars = [stats.per_language[lab].mean_chars for lab in labels]
    x = np.arange(len(labels))
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(max(6.0, 0.5 * len(labels) + 2), 3.5))
        ax1.bar(x, lines, color="tab:blue")
        ax1.set_ylabel("mean lines")
        ax2.bar(x, chars, color="tab:orange")
        ax2.set_ylabel("mean characters")
        for ax in (ax1, ax2):
            ax.set_xticks(x)
            ax.set_xticklabels(labels, rotation=90)
        fig.tight_layout()
        _save(fig, path)
