"""Ranking and rendering of trained patterns as publication-style tables.

Turns a sparse model into the top positively weighted patterns with their
supports and odds ratios, renders id lists as event names with repeated
blocks collapsed to "[block]xN", and emits CSV/JSON tables plus sequence
length histogram data. No plotting here; figures live next door.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from .core import EventAlphabet, LabeledDataset, contains
from .solver import ModelSolution

__all__ = [
    "RankedPattern",
    "rank_positive",
    "render_pattern",
    "write_report_csv",
    "write_report_json",
    "length_histogram",
    "write_length_histogram",
]


@dataclass(frozen=True)
class RankedPattern:
    pattern: tuple[int, ...]
    description: str
    support: int
    weight: float
    odds_ratio: float

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(int(e) for e in self.pattern))


def _collapse(events: tuple[int, ...]) -> list[tuple[tuple[int, ...], int]]:
    """Segment an id list into (block, repetitions) runs, left to right.

    Only blocks of length >= 2 repeated >= 2 times collapse. At each start
    the run covering the most events wins; equal coverage goes to the
    shorter block (more repetitions), matching renderings like
    "[phase, breakdown]x4" over "[phase, breakdown, phase, breakdown]x2".
    Concatenating block * reps over the result reproduces the input.
    """
    out: list[tuple[tuple[int, ...], int]] = []
    i = 0
    n = len(events)
    while i < n:
        best_len = 0
        best_reps = 0
        best_span = 0
        for blk in range(2, (n - i) // 2 + 1):
            block = events[i : i + blk]
            reps = 1
            while events[i + reps * blk : i + (reps + 1) * blk] == block:
                reps += 1
            if reps < 2:
                continue
            span = blk * reps
            if span > best_span or (span == best_span and reps > best_reps):
                best_len = blk
                best_reps = reps
                best_span = span
        if best_span:
            out.append((events[i : i + best_len], best_reps))
            i += best_span
        else:
            out.append(((events[i],), 1))
            i += 1
    return out


def render_pattern(pattern, alphabet: EventAlphabet) -> str:
    """Event-name rendering with repeated blocks shown as "[names]xN".

    Unknown ids raise KeyError.
    """
    events = tuple(pattern.events if hasattr(pattern, "events") else pattern)
    parts = []
    for block, reps in _collapse(events):
        names = ", ".join(alphabet.name_of(e) for e in block)
        if reps > 1:
            parts.append(f"[{names}]x{reps}")
        else:
            parts.append(names)
    return ", ".join(parts)


def _ids_rendering(events: tuple[int, ...]) -> str:
    parts = []
    for block, reps in _collapse(events):
        names = ", ".join(str(e) for e in block)
        if reps > 1:
            parts.append(f"[{names}]x{reps}")
        else:
            parts.append(names)
    return ", ".join(parts)


def rank_positive(
    model: ModelSolution,
    dataset: LabeledDataset,
    min_support: int = 5,
    k: int = 5,
    alphabet: EventAlphabet | None = None,
) -> list[RankedPattern]:
    """Top k patterns by positive weight, dropping support < min_support.

    Support is the document count in the given dataset, recomputed here so
    the table is honest for whatever dataset it is reported against. Equal
    weights order by higher support, then by id list. Descriptions use the
    alphabet when given, bare ids otherwise.
    """
    rows = []
    for pat, w in model.weights.items():
        if w <= 0.0:
            continue
        support = sum(1 for s in dataset.sequences if contains(pat, s))
        if support < min_support:
            continue
        rows.append((pat, w, support))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    ranked = []
    for pat, w, support in rows[:k]:
        desc = render_pattern(pat, alphabet) if alphabet is not None else _ids_rendering(pat)
        ranked.append(
            RankedPattern(
                pattern=pat,
                description=desc,
                support=support,
                weight=float(w),
                odds_ratio=math.exp(w),
            )
        )
    return ranked


_COLUMNS = ("pattern_ids", "description", "support", "weight", "odds_ratio")


def write_report_csv(path, ranked: list[RankedPattern]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for r in ranked:
            writer.writerow(
                [
                    " ".join(str(e) for e in r.pattern),
                    r.description,
                    r.support,
                    repr(r.weight),
                    repr(r.odds_ratio),
                ]
            )


def write_report_json(path, ranked: list[RankedPattern]) -> None:
    rows = [
        {
            "pattern_ids": list(r.pattern),
            "description": r.description,
            "support": r.support,
            "weight": r.weight,
            "odds_ratio": r.odds_ratio,
        }
        for r in ranked
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


def length_histogram(dataset: LabeledDataset) -> list[tuple[int, ...]]:
    """Sequence-length counts, one row per length over the observed range.

    Labeled datasets give (length, n_pos, n_neg) rows; unlabeled give
    (length, count). Zero-count lengths inside the range are included so
    the rows plot directly as a histogram.
    """
    lengths = [len(s) for s in dataset.sequences]
    if not lengths:
        return []
    lo, hi = min(lengths), max(lengths)
    if dataset.labels is None:
        counts = {length: 0 for length in range(lo, hi + 1)}
        for length in lengths:
            counts[length] += 1
        return [(length, counts[length]) for length in range(lo, hi + 1)]
    pos = {length: 0 for length in range(lo, hi + 1)}
    neg = dict(pos)
    for length, y in zip(lengths, dataset.labels):
        (pos if y == 1 else neg)[length] += 1
    return [(length, pos[length], neg[length]) for length in range(lo, hi + 1)]


def write_length_histogram(path, dataset: LabeledDataset) -> None:
    rows = length_histogram(dataset)
    header = ("length", "count") if dataset.labels is None else ("length", "n_pos", "n_neg")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
