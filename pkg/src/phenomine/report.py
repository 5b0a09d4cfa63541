"""Figure rendering for the report path.

Every plot is written straight to a file with the Agg backend, so this
works headless. Figures sit next to the delimited artifacts they
illustrate and are regenerated whenever the producing stage runs.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cohort import LosCategory
from .topics import TopicModel, top_keywords

_DPI = 120


def save_coherence_figure(path: str, rows: Sequence[Tuple[int, float, float]],
                          selected_k: int, measure: str) -> None:
    """Line plot of both coherence measures across candidate k."""
    ks = [r[0] for r in rows]
    umass = [r[1] for r in rows]
    cv = [r[2] for r in rows]
    fig, ax_cv = plt.subplots(figsize=(6, 4))
    ax_umass = ax_cv.twinx()
    ax_cv.plot(ks, cv, marker="o", color="tab:blue", label="window npmi")
    ax_umass.plot(ks, umass, marker="s", color="tab:orange", label="doc co-occurrence")
    ax_cv.axvline(selected_k, color="grey", linestyle="--", linewidth=1)
    ax_cv.annotate(f"selected k={selected_k}", xy=(selected_k, max(cv)),
                   fontsize=8, ha="center", va="bottom")
    ax_cv.set_xlabel("number of topics")
    ax_cv.set_ylabel("window npmi coherence", color="tab:blue")
    ax_umass.set_ylabel("doc co-occurrence coherence", color="tab:orange")
    ax_cv.set_xticks(ks)
    ax_cv.set_title(f"coherence scan (selected by {measure})")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_class_histogram(path: str, counts: Dict[int, int]) -> None:
    """Bar chart of stay-length class sizes."""
    codes = sorted(LosCategory)
    values = [counts.get(int(c), 0) for c in codes]
    labels = [c.label for c in codes]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(codes)), values, color="tab:blue")
    ax.set_xticks(range(len(codes)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("encounters")
    ax.set_title("stay-length classes")
    for i, v in enumerate(values):
        ax.annotate(str(v), xy=(i, v), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_topic_keywords(path: str, model: TopicModel, source: str,
                        top_n: int = 10) -> None:
    """One horizontal bar panel of top terms per topic."""
    k = model.k()
    cols = min(3, k)
    rows = (k + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 2.6 * rows),
                             squeeze=False)
    for t in range(k):
        ax = axes[t // cols][t % cols]
        pairs = top_keywords(model, t, top_n)
        terms = [p[0] for p in pairs][::-1]
        probs = [p[1] for p in pairs][::-1]
        ax.barh(range(len(terms)), probs, color="tab:green")
        ax.set_yticks(range(len(terms)))
        ax.set_yticklabels(terms, fontsize=7)
        ax.set_title(f"topic {t}", fontsize=9)
        ax.tick_params(axis="x", labelsize=7)
    for j in range(k, rows * cols):
        axes[j // cols][j % cols].axis("off")
    fig.suptitle(f"{source} topics: top terms by probability", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_metrics_grid(path: str, grid: Dict[str, Dict[str, Dict[str, Dict[str, float]]]],
                      metric: str = "accuracy") -> None:
    """Heatmap of one metric over classifier x (weighting, source)."""
    weightings = list(grid)
    sources = list(next(iter(grid.values())))
    classifiers = list(next(iter(next(iter(grid.values())).values())))
    col_labels = [f"{w}/{s}" for w in weightings for s in sources]
    data = np.zeros((len(classifiers), len(col_labels)))
    for i, clf in enumerate(classifiers):
        j = 0
        for w in weightings:
            for s in sources:
                data[i, j] = grid[w][s][clf][metric]
                j += 1
    fig, ax = plt.subplots(figsize=(1.4 * len(col_labels) + 2, 0.7 * len(classifiers) + 2))
    im = ax.imshow(data, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(col_labels)))
    ax.set_xticklabels(col_labels, rotation=30, ha="right", fontsize=8)
    ax.set_yticks(range(len(classifiers)))
    ax.set_yticklabels(classifiers, fontsize=9)
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            colour = "white" if data[i, j] < 0.6 else "black"
            ax.annotate(f"{data[i, j]:.3f}", xy=(j, i), ha="center", va="center",
                        fontsize=7, color=colour)
    ax.set_title(f"test {metric} by classifier, weighting and note source")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
