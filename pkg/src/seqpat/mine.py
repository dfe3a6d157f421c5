"""Unsupervised frequent sequential pattern mining.

Four interchangeable algorithms over single-event sequences (s-extensions
only, document-based support): PrefixSpan pattern growth, CM-SPAM vertical
bitmaps, CM-SPADE id-list joins, and a brute-force oracle. All return the
identical complete frequent set in canonical order (descending support,
then lexicographic event ids).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledDataset, Pattern, contains, flatten_sequences

__all__ = [
    "MiningConfig",
    "MiningResult",
    "mine",
    "brute_force_mine",
    "top_k_by_support",
]

ALGORITHMS = ("prefixspan", "cm-spam", "cm-spade", "bruteforce")


@dataclass(frozen=True)
class MiningConfig:
    min_support: int
    max_length: int = 20
    algorithm: str = "prefixspan"
    use_cmap: bool = True  # co-occurrence pruning for cm-spam / cm-spade
    max_gap: int | None = None

    def __post_init__(self):
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.max_gap is not None and self.max_gap < 0:
            raise ValueError("max_gap must be >= 0")


@dataclass(frozen=True)
class MiningResult:
    patterns: tuple[Pattern, ...]
    algorithm: str
    config: MiningConfig
    elapsed_s: float
    stats: dict = field(default_factory=dict)

    def supports(self) -> dict[tuple[int, ...], int]:
        return {p.events: p.support for p in self.patterns}


def _sequences_of(dataset) -> list[tuple[int, ...]]:
    if isinstance(dataset, LabeledDataset):
        return list(dataset.sequences)
    return [tuple(s) for s in dataset]


def _canonical(found: list[tuple[tuple[int, ...], int]]) -> tuple[Pattern, ...]:
    found.sort(key=lambda ps: (-ps[1], ps[0]))
    return tuple(Pattern(events, support) for events, support in found)


def mine(dataset, config: MiningConfig) -> MiningResult:
    """Complete set of subsequences with support >= min_support and length
    <= max_length. min_support > n simply yields an empty result."""
    seqs = _sequences_of(dataset)
    if not seqs:
        raise ValueError("empty dataset")
    t0 = time.perf_counter()
    stats: dict = {}
    if config.algorithm == "bruteforce":
        found = _brute_force(seqs, config, stats)
    elif config.algorithm == "prefixspan":
        found = _prefixspan(seqs, config, stats)
    elif config.algorithm == "cm-spam":
        found = _cm_spam(seqs, config, stats)
    else:
        found = _cm_spade(seqs, config, stats)
    return MiningResult(
        patterns=_canonical(found),
        algorithm=config.algorithm,
        config=config,
        elapsed_s=time.perf_counter() - t0,
        stats=stats,
    )


def brute_force_mine(dataset, config: MiningConfig) -> MiningResult:
    """Oracle miner: enumerate candidate tuples level by level, score each
    with core.contains. Intended for tiny instances."""
    cfg = MiningConfig(
        config.min_support, config.max_length, "bruteforce", config.use_cmap, config.max_gap
    )
    return mine(dataset, cfg)


def top_k_by_support(result: MiningResult, k: int) -> list[Pattern]:
    """First k patterns in canonical order (ties fall to lexicographic ids)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(result.patterns[:k])


# ---------------------------------------------------------------- brute force


def _brute_force(seqs, config, stats):
    events = sorted({e for s in seqs for e in s})
    found: list[tuple[tuple[int, ...], int]] = []
    frontier: list[tuple[int, ...]] = [()]
    candidates = 0
    for _ in range(config.max_length):
        nxt = []
        for prefix in frontier:
            for e in events:
                cand = prefix + (e,)
                candidates += 1
                sup = sum(1 for s in seqs if contains(cand, s, config.max_gap))
                if sup >= config.min_support:
                    found.append((cand, sup))
                    nxt.append(cand)
        # only frequent prefixes extend: support is anti-monotone, with or
        # without the gap bound
        frontier = nxt
        if not frontier:
            break
    stats["candidates"] = candidates
    return found


# ----------------------------------------------------------------- prefixspan


def _prefixspan(seqs, config, stats):
    if config.max_gap is not None:
        return _prefixspan_gapped(seqs, config, stats)
    found: list[tuple[tuple[int, ...], int]] = []
    counter = [0]
    proj = [(i, 0) for i in range(len(seqs))]
    _ps_grow((), proj, seqs, config, found, counter)
    stats["candidates"] = counter[0]
    return found


def _ps_grow(prefix, proj, seqs, config, found, counter):
    if len(prefix) >= config.max_length:
        return
    # First-occurrence pseudo-projection: one (sequence, offset) per entry.
    ext: dict[int, list[tuple[int, int]]] = {}
    for i, off in proj:
        s = seqs[i]
        seen: dict[int, int] = {}
        for t in range(off, len(s)):
            e = s[t]
            if e not in seen:
                seen[e] = t + 1
        for e, nxt_off in seen.items():
            ext.setdefault(e, []).append((i, nxt_off))
    for e in sorted(ext):
        counter[0] += 1
        entries = ext[e]
        if len(entries) < config.min_support:
            continue
        pat = prefix + (e,)
        found.append((pat, len(entries)))
        _ps_grow(pat, entries, seqs, config, found, counter)


def _ps_grow_gapped(prefix, proj, seqs, config, found, counter):
    # proj: list of (sequence index, feasible end positions of prefix)
    if len(prefix) >= config.max_length:
        return
    window = config.max_gap + 1
    ext: dict[int, list[tuple[int, list[int]]]] = {}
    for i, ends in proj:
        s = seqs[i]
        per_event: dict[int, list[int]] = {}
        for t0 in ends:
            hi = min(len(s), t0 + 1 + window)
            for t in range(t0 + 1, hi):
                per_event.setdefault(s[t], []).append(t)
        for e, ts in per_event.items():
            ext.setdefault(e, []).append((i, sorted(set(ts))))
    for e in sorted(ext):
        counter[0] += 1
        entries = ext[e]
        if len(entries) < config.min_support:
            continue
        pat = prefix + (e,)
        found.append((pat, len(entries)))
        _ps_grow_gapped(pat, entries, seqs, config, found, counter)


def _prefixspan_gapped(seqs, config, stats):
    found: list[tuple[tuple[int, ...], int]] = []
    counter = [0]
    # Length-1 patterns have no gap constraint; seed with all positions.
    starts: dict[int, list[tuple[int, list[int]]]] = {}
    for i, s in enumerate(seqs):
        per_event: dict[int, list[int]] = {}
        for t, e in enumerate(s):
            per_event.setdefault(e, []).append(t)
        for e, ts in per_event.items():
            starts.setdefault(e, []).append((i, ts))
    for e in sorted(starts):
        counter[0] += 1
        entries = starts[e]
        if len(entries) < config.min_support:
            continue
        found.append(((e,), len(entries)))
        _ps_grow_gapped((e,), entries, seqs, config, found, counter)
    stats["candidates"] = counter[0]
    return found


# -------------------------------------------------- co-occurrence map (CMAP)


def _build_cmap(seqs, min_support) -> dict[int, set[int]]:
    """cmap[a] = events b that follow a (any gap) in >= min_support sequences."""
    counts: dict[tuple[int, int], int] = {}
    for s in seqs:
        first: dict[int, int] = {}
        for t, e in enumerate(s):
            if e not in first:
                first[e] = t
        for a, ta in first.items():
            followers = {s[t] for t in range(ta + 1, len(s))}
            for b in followers:
                counts[(a, b)] = counts.get((a, b), 0) + 1
    cmap: dict[int, set[int]] = {}
    for (a, b), c in counts.items():
        if c >= min_support:
            cmap.setdefault(a, set()).add(b)
    return cmap


# -------------------------------------------------------------------- cm-spam


def _cm_spam(seqs, config, stats):
    if config.max_gap is not None:
        raise ValueError("cm-spam does not support max_gap")
    tokens, indptr = flatten_sequences(seqs)
    n = len(seqs)
    starts = indptr[:-1]
    lengths = (indptr[1:] - indptr[:-1]).astype(np.int64)

    events = sorted({e for s in seqs for e in s})
    bitmaps = {e: tokens == e for e in events}

    def support_of(bitmap: np.ndarray) -> int:
        return int(np.logical_or.reduceat(bitmap, starts).sum()) if bitmap.any() else 0

    def s_step(bitmap: np.ndarray) -> np.ndarray:
        # Positions strictly after the first set bit of each sequence segment.
        csp = np.zeros(bitmap.size, dtype=np.int64)
        np.cumsum(bitmap[:-1], out=csp[1:])
        before = csp - np.repeat(csp[starts], lengths)
        return before > 0

    cmap = _build_cmap(seqs, config.min_support) if config.use_cmap else None
    found: list[tuple[tuple[int, ...], int]] = []
    candidates = 0

    frequent_events = []
    for e in events:
        candidates += 1
        sup = support_of(bitmaps[e])
        if sup >= config.min_support:
            found.append(((e,), sup))
            frequent_events.append(e)

    def grow(pat, bitmap):
        nonlocal candidates
        if len(pat) >= config.max_length:
            return
        follow = s_step(bitmap)
        if not follow.any():
            return
        allowed = cmap.get(pat[-1], set()) if cmap is not None else None
        for e in frequent_events:
            if allowed is not None and e not in allowed:
                continue
            candidates += 1
            nb = follow & bitmaps[e]
            sup = support_of(nb)
            if sup >= config.min_support:
                found.append((pat + (e,), sup))
                grow(pat + (e,), nb)

    for e in frequent_events:
        grow((e,), bitmaps[e])
    stats["candidates"] = candidates
    return found


# ------------------------------------------------------------------- cm-spade


def _cm_spade(seqs, config, stats):
    if config.max_gap is not None:
        raise ValueError("cm-spade does not support max_gap")
    # Vertical id-lists: event -> {sid: sorted positions}.
    vert: dict[int, dict[int, list[int]]] = {}
    for sid, s in enumerate(seqs):
        for t, e in enumerate(s):
            vert.setdefault(e, {}).setdefault(sid, []).append(t)

    cmap = _build_cmap(seqs, config.min_support) if config.use_cmap else None
    found: list[tuple[tuple[int, ...], int]] = []
    candidates = 0

    frequent_events = []
    for e in sorted(vert):
        candidates += 1
        if len(vert[e]) >= config.min_support:
            found.append(((e,), len(vert[e])))
            frequent_events.append(e)

    def temporal_join(idl: dict[int, list[int]], e: int) -> dict[int, list[int]]:
        eidl = vert[e]
        out: dict[int, list[int]] = {}
        for sid, pos in idl.items():
            other = eidl.get(sid)
            if other is None:
                continue
            lo = pos[0]  # earliest end of the current pattern in sid
            after = [t for t in other if t > lo]
            if after:
                out[sid] = after
        return out

    def grow(pat, idl):
        nonlocal candidates
        if len(pat) >= config.max_length:
            return
        allowed = cmap.get(pat[-1], set()) if cmap is not None else None
        for e in frequent_events:
            if allowed is not None and e not in allowed:
                continue
            candidates += 1
            nidl = temporal_join(idl, e)
            if len(nidl) >= config.min_support:
                found.append((pat + (e,), len(nidl)))
                grow(pat + (e,), nidl)

    for e in frequent_events:
        grow((e,), vert[e])
    stats["candidates"] = candidates
    return found
