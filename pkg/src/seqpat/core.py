"""Sequence/pattern data model, containment, dataset I/O, descriptive stats.

Sequences and patterns are plain tuples of positive integer event ids.
Everything here is an immutable value after construction, so instances can
be shared freely across threads.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EventAlphabet",
    "LabeledDataset",
    "Pattern",
    "DatasetStats",
    "contains",
    "load_alphabet",
    "load_dataset",
    "save_dataset",
    "compute_stats",
    "split_by_label",
    "flatten_sequences",
]


@dataclass(frozen=True)
class EventAlphabet:
    """Maps integer event ids to names and team side."""

    entries: tuple[tuple[int, str, str], ...]  # (id, name, side)

    def __post_init__(self):
        ids = [e[0] for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("alphabet ids must be unique")
        for eid, name, side in self.entries:
            if eid <= 0:
                raise ValueError(f"alphabet id {eid} must be positive")
            if side not in ("team", "opposition"):
                raise ValueError(f"alphabet side {side!r} must be 'team' or 'opposition'")

    @property
    def names(self) -> dict[int, str]:
        return {eid: name for eid, name, _ in self.entries}

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(e[0] for e in self.entries)

    def name_of(self, eid: int) -> str:
        for i, name, _ in self.entries:
            if i == eid:
                return name
        raise KeyError(f"event id {eid} not in alphabet")

    def sha256(self) -> str:
        # Canonical digest: sorted by id, one "id,name,side" line each.
        text = "".join(
            f"{eid},{name},{side}\n" for eid, name, side in sorted(self.entries)
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered event sequences with optional +/-1 labels."""

    sequences: tuple[tuple[int, ...], ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "sequences", tuple(tuple(int(e) for e in s) for s in self.sequences)
        )
        for k, s in enumerate(self.sequences):
            if len(s) == 0:
                raise ValueError(f"sequence {k} is empty")
            if any(e <= 0 for e in s):
                raise ValueError(f"sequence {k} has a non-positive event id")
        if self.labels is not None:
            labels = tuple(int(y) for y in self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(self.sequences):
                raise ValueError("labels and sequences differ in length")
            if any(y not in (1, -1) for y in labels):
                raise ValueError("labels must be +1 or -1")

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def n_pos(self) -> int | None:
        return None if self.labels is None else sum(1 for y in self.labels if y == 1)

    @property
    def n_neg(self) -> int | None:
        return None if self.labels is None else sum(1 for y in self.labels if y == -1)

    def event_ids(self) -> frozenset[int]:
        return frozenset(e for s in self.sequences for e in s)

    def validate_alphabet(self, alphabet: EventAlphabet) -> None:
        missing = self.event_ids() - alphabet.ids
        if missing:
            raise ValueError(f"event ids {sorted(missing)} missing from alphabet")


@dataclass(frozen=True)
class Pattern:
    """An ordered event-id list plus its document support in some dataset."""

    events: tuple[int, ...]
    support: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(int(e) for e in self.events))

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class DatasetStats:
    mean: float
    std: float
    min: int
    p25: float
    median: float
    p75: float
    max: int
    skewness: float
    n: int
    n_pos: int | None = None
    n_neg: int | None = None


def contains(pattern, sequence, max_gap: int | None = None) -> bool:
    """True iff pattern embeds in sequence as a subsequence.

    Gaps between consecutive matched positions are unlimited by default;
    with max_gap set, at most max_gap events may be skipped between
    consecutive matches (0 means contiguous). Accepts Pattern objects or
    raw id iterables for both arguments. The empty pattern is trivially
    contained.
    """
    pat = pattern.events if isinstance(pattern, Pattern) else tuple(pattern)
    seq = sequence.events if isinstance(sequence, Pattern) else tuple(sequence)
    if not pat:
        return True
    if max_gap is None:
        k = 0
        for e in seq:
            if e == pat[k]:
                k += 1
                if k == len(pat):
                    return True
        return False
    # Gap-bounded: track every feasible end position of the matched prefix.
    ends = [t for t, e in enumerate(seq) if e == pat[0]]
    for sym in pat[1:]:
        if not ends:
            return False
        nxt = []
        for t, e in enumerate(seq):
            if e != sym:
                continue
            if any(0 < t - t0 <= max_gap + 1 for t0 in ends):
                nxt.append(t)
        ends = nxt
    return bool(ends)


def load_alphabet(path) -> EventAlphabet:
    """Read an `id,name,side` CSV. A header row is recognized and skipped."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if ln == 1 and parts[0].lower() == "id":
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{ln}: expected 'id,name,side', got {line!r}")
            try:
                eid = int(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{ln}: bad event id {parts[0]!r}") from None
            entries.append((eid, parts[1], parts[2]))
    if not entries:
        raise ValueError(f"{path}: empty alphabet file")
    return EventAlphabet(tuple(entries))


_LABEL_TOKENS = {"1": 1, "+1": 1, "-1": -1}


def load_dataset(path, format: str = "native-tsv") -> LabeledDataset:
    """Read the native format: one sequence per line, whitespace-separated
    ids, optional leading label token. `#` lines are comments.

    The file is treated as labeled iff the first token of every data line is
    1, +1, or -1; a mix of labeled and unlabeled lines is an error.
    """
    if format != "native-tsv":
        raise ValueError(f"unknown dataset format {format!r}")
    lines: list[tuple[int, list[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if raw.lstrip().startswith("#"):
                continue
            toks = raw.split()
            if not toks:
                raise ValueError(f"{path}:{ln}: empty sequence line")
            lines.append((ln, toks))
    if not lines:
        raise ValueError(f"{path}: no sequences")

    labeled = all(t[0] in _LABEL_TOKENS for _, t in lines)
    if not labeled and any(t[0] in ("-1", "+1") for _, t in lines):
        raise ValueError(f"{path}: mixed labeled and unlabeled lines")

    sequences, labels = [], []
    for ln, toks in lines:
        if labeled:
            labels.append(_LABEL_TOKENS[toks[0]])
            toks = toks[1:]
            if not toks:
                raise ValueError(f"{path}:{ln}: empty sequence line")
        try:
            seq = tuple(int(t) for t in toks)
        except ValueError:
            bad = next(t for t in toks if not t.lstrip("-").isdigit())
            raise ValueError(f"{path}:{ln}: malformed token {bad!r}") from None
        if any(e <= 0 for e in seq):
            raise ValueError(f"{path}:{ln}: non-positive event id")
        sequences.append(seq)
    return LabeledDataset(tuple(sequences), tuple(labels) if labeled else None)


def save_dataset(dataset: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, seq in enumerate(dataset.sequences):
            body = " ".join(str(e) for e in seq)
            if dataset.labels is not None:
                fh.write(f"{dataset.labels[i]} {body}\n")
            else:
                fh.write(body + "\n")


def _skewness(lengths: np.ndarray) -> float:
    # Adjusted Fisher-Pearson (G1). Degenerate cases report 0.
    n = lengths.size
    if n < 3:
        return 0.0
    m = lengths.mean()
    m2 = ((lengths - m) ** 2).mean()
    if m2 == 0:
        return 0.0
    g1 = ((lengths - m) ** 3).mean() / m2**1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def compute_stats(dataset: LabeledDataset) -> DatasetStats:
    """Length statistics over the dataset's sequences."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    lengths = np.array([len(s) for s in dataset.sequences], dtype=np.float64)
    std = float(lengths.std(ddof=1)) if lengths.size > 1 else 0.0
    return DatasetStats(
        mean=float(lengths.mean()),
        std=std,
        min=int(lengths.min()),
        p25=float(np.percentile(lengths, 25)),
        median=float(np.percentile(lengths, 50)),
        p75=float(np.percentile(lengths, 75)),
        max=int(lengths.max()),
        skewness=_skewness(lengths),
        n=len(dataset),
        n_pos=dataset.n_pos,
        n_neg=dataset.n_neg,
    )


def split_by_label(dataset: LabeledDataset) -> tuple[LabeledDataset, LabeledDataset]:
    """Partition into (positive, negative) preserving order."""
    if dataset.labels is None:
        raise ValueError("dataset is unlabeled")
    pos = tuple(s for s, y in zip(dataset.sequences, dataset.labels) if y == 1)
    neg = tuple(s for s, y in zip(dataset.sequences, dataset.labels) if y == -1)
    return (
        LabeledDataset(pos, (1,) * len(pos)),
        LabeledDataset(neg, (-1,) * len(neg)),
    )


def flatten_sequences(sequences) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate sequences into (tokens, indptr) arrays for the kernels.

    Sequence i occupies tokens[indptr[i]:indptr[i+1]].
    """
    indptr = np.zeros(len(sequences) + 1, dtype=np.int64)
    for i, s in enumerate(sequences):
        indptr[i + 1] = indptr[i] + len(s)
    tokens = np.empty(indptr[-1], dtype=np.int64)
    for i, s in enumerate(sequences):
        tokens[indptr[i] : indptr[i + 1]] = s
    return tokens, indptr
