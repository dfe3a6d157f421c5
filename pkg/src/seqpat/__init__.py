"""seqpat: frequent-subsequence mining and sparse pattern-weighted
classification for event-sequence datasets."""

__version__ = "0.1.0"

from .core import (
    DatasetStats,
    EventAlphabet,
    LabeledDataset,
    Pattern,
    compute_stats,
    contains,
    load_alphabet,
    load_dataset,
    save_dataset,
    split_by_label,
)

__all__ = [
    "__version__",
    "DatasetStats",
    "EventAlphabet",
    "LabeledDataset",
    "Pattern",
    "compute_stats",
    "contains",
    "load_alphabet",
    "load_dataset",
    "save_dataset",
    "split_by_label",
]
