"""Figure rendering for the report path.

Kept separate from the table/CSV logic so the report module stays pure.
Uses the Agg backend unconditionally; every figure goes straight to a file.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .core import LabeledDataset
from .report import RankedPattern, length_histogram

__all__ = [
    "render_length_histogram",
    "render_top_patterns",
]


def render_length_histogram(dataset: LabeledDataset, path, title: str | None = None) -> None:
    """Bar chart of sequence-length counts, split by label when present."""
    rows = length_histogram(dataset)
    if not rows:
        raise ValueError("empty dataset")
    lengths = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    if dataset.labels is None:
        ax.bar(lengths, [r[1] for r in rows], color="#4878d0", width=0.8)
    else:
        n_pos = [r[1] for r in rows]
        n_neg = [r[2] for r in rows]
        ax.bar(lengths, n_neg, color="#a9a9a9", width=0.8, label="negative")
        ax.bar(lengths, n_pos, bottom=n_neg, color="#d65f5f", width=0.8, label="positive")
        ax.legend(frameon=False)
    ax.set_xlabel("sequence length (events)")
    ax.set_ylabel("sequences")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_top_patterns(ranked: list[RankedPattern], path, title: str | None = None) -> None:
    """Horizontal bars of the ranked patterns' weights, annotated with the
    odds ratio; rows appear top-down in rank order."""
    if not ranked:
        raise ValueError("no patterns to render")
    labels = [r.description for r in ranked]
    weights = [r.weight for r in ranked]
    pos = range(len(ranked) - 1, -1, -1)
    fig, ax = plt.subplots(figsize=(8.0, 0.7 * len(ranked) + 1.5))
    ax.barh(list(pos), weights, color="#4878d0", height=0.6)
    ax.set_yticks(list(pos))
    ax.set_yticklabels(labels)
    for p, r in zip(pos, ranked):
        ax.annotate(
            f"OR {r.odds_ratio:.3f}",
            (r.weight, p),
            xytext=(4, 0),
            textcoords="offset points",
            va="center",
            fontsize=8,
        )
    ax.set_xlabel("weight")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
