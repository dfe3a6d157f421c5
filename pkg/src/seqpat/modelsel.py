"""Repeated stratified k-fold cross-validation with deterministic seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabeledDataset
from .solver import ModelSolution

__all__ = [
    "CvConfig",
    "CvTable",
    "make_folds",
    "evaluate",
    "confusion",
    "write_cv_table",
]


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    repeats: int = 10
    seed: int = 0
    metric: str = "accuracy"

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.metric != "accuracy":
            raise ValueError(f"unsupported metric {self.metric!r}")


@dataclass(frozen=True)
class CvTable:
    """Per-lambda validation summary plus a confusion audit.

    confusion rows are mean (tp, fp, tn, fn) counts per validation fold.
    """

    lams: tuple[float, ...]
    mean_acc: tuple[float, ...]
    std_acc: tuple[float, ...]
    mean_nnz: tuple[float, ...]
    confusion: tuple[tuple[float, float, float, float], ...]


def make_folds(labels, config: CvConfig, repeat: int):
    """Stratified fold index pairs, deterministic in (seed, repeat).

    Each class is shuffled and dealt round-robin, so per-fold class counts
    differ by at most one.
    """
    y = np.asarray(labels)
    n = y.size
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    if min(pos.size, neg.size) < config.folds:
        raise ValueError(
            f"smallest class has {min(pos.size, neg.size)} members, fewer than "
            f"{config.folds} folds; use fewer folds"
        )
    rng = np.random.default_rng((config.seed, repeat))
    pos = pos[rng.permutation(pos.size)]
    neg = neg[rng.permutation(neg.size)]
    out = []
    for k in range(config.folds):
        val = np.sort(np.concatenate([pos[k :: config.folds], neg[k :: config.folds]]))
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        out.append((np.flatnonzero(mask), val))
    return out


def _predictions(model: ModelSolution, dataset: LabeledDataset) -> np.ndarray:
    # sign(0) counts as +1 by convention
    f = np.array([model.decision_value(s) for s in dataset.sequences])
    return np.where(f >= 0.0, 1, -1)


def evaluate(model: ModelSolution, dataset: LabeledDataset) -> float:
    """Fraction of sequences with sign(f) equal to the label."""
    if dataset.labels is None:
        raise ValueError("dataset is unlabeled")
    pred = _predictions(model, dataset)
    y = np.asarray(dataset.labels)
    return float((pred == y).mean())


def confusion(model: ModelSolution, dataset: LabeledDataset) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) counts under the same sign convention as evaluate."""
    if dataset.labels is None:
        raise ValueError("dataset is unlabeled")
    pred = _predictions(model, dataset)
    y = np.asarray(dataset.labels)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == -1)))
    tn = int(np.sum((pred == -1) & (y == -1)))
    fn = int(np.sum((pred == -1) & (y == 1)))
    return tp, fp, tn, fn


def write_cv_table(table: CvTable, path) -> None:
    """CSV with exactly: lambda, mean_acc, std_acc, mean_nnz."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda,mean_acc,std_acc,mean_nnz\n")
        for lam, ma, sa, mn in zip(table.lams, table.mean_acc, table.std_acc, table.mean_nnz):
            fh.write(f"{lam!r},{ma!r},{sa!r},{mn!r}\n")
