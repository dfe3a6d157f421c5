"""Delimit raw match event streams into passages of play and build the
scoring/conceding outcome datasets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .core import EventAlphabet, LabeledDataset

__all__ = [
    "MatchStream",
    "DelimitConfig",
    "rugby_alphabet",
    "delimit_match",
    "delimit_matches",
    "build_outcome_dataset",
    "load_event_stream",
]

# Team events 1-12, opposition mirrors 13-24.
_RUGBY_NAMES = (
    "restart reception",
    "phase",
    "breakdown",
    "kick in play",
    "penalty conceded",
    "kick at goal",
    "quick tap",
    "lineout",
    "error",
    "scrum",
    "try",
    "linebreak",
)


def rugby_alphabet() -> EventAlphabet:
    """The 24-event rugby alphabet: ids 1-12 for the team, 13-24 mirrored
    for the opposition with an `O-` name prefix."""
    entries = [(i + 1, name, "team") for i, name in enumerate(_RUGBY_NAMES)]
    entries += [(i + 13, "O-" + name, "opposition") for i, name in enumerate(_RUGBY_NAMES)]
    return EventAlphabet(tuple(entries))


@dataclass(frozen=True)
class MatchStream:
    """One match as a single long event sequence."""

    match_id: str
    events: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(int(e) for e in self.events))
        if not self.events:
            raise ValueError(f"match {self.match_id!r} has no events")


@dataclass(frozen=True)
class DelimitConfig:
    """Passage boundary rules.

    A passage starts at every start event (restart receptions, lineouts,
    scrums of either side), except a scrum directly following a scrum
    (scrum reset) when suppression is on, and a new passage begins right
    after every post-boundary event (tries and kicks at goal).
    """

    start_events: frozenset[int] = frozenset({1, 8, 10, 13, 20, 22})
    post_boundary_events: frozenset[int] = frozenset({6, 11, 18, 23})
    scrum_reset_suppression: bool = True
    scrum_events: frozenset[int] = frozenset({10, 22})
    alphabet_ids: frozenset[int] = frozenset(range(1, 25))

    def __post_init__(self):
        if self.start_events & self.post_boundary_events:
            raise ValueError("start and post-boundary event sets must be disjoint")


def delimit_match(stream: MatchStream, config: DelimitConfig = DelimitConfig()) -> list[tuple[int, ...]]:
    """Split one match stream into passages of play.

    Every event lands in exactly one passage and concatenating the passages
    reproduces the stream.
    """
    passages: list[tuple[int, ...]] = []
    cur: list[int] = []
    prev = None
    for pos, e in enumerate(stream.events):
        if e not in config.alphabet_ids:
            raise ValueError(
                f"match {stream.match_id!r}: unknown event id {e} at position {pos}"
            )
        if e in config.start_events and cur:
            reset = (
                config.scrum_reset_suppression
                and e in config.scrum_events
                and prev in config.scrum_events
            )
            if not reset:
                passages.append(tuple(cur))
                cur = []
        cur.append(e)
        if e in config.post_boundary_events:
            passages.append(tuple(cur))
            cur = []
        prev = e
    if cur:
        passages.append(tuple(cur))
    return passages


def delimit_matches(streams, config: DelimitConfig = DelimitConfig()) -> list[tuple[int, ...]]:
    """Delimit several matches; passages keep match order then passage order."""
    out: list[tuple[int, ...]] = []
    for stream in streams:
        out.extend(delimit_match(stream, config))
    return out


# Outcome events per perspective: (label events, deleted events).
_PERSPECTIVES = {
    "scoring": frozenset({6, 11}),
    "conceding": frozenset({18, 23}),
}


def build_outcome_dataset(passages, perspective: str) -> LabeledDataset:
    """Label passages by scoring outcome and strip the outcome events.

    scoring: y=+1 iff the passage contains a team try (11) or kick at goal
    (6), and ids {6,11} are removed from every passage. conceding: same with
    the opposition ids {23,18}. Passages left empty by the removal are
    dropped with a warning.
    """
    try:
        outcome_ids = _PERSPECTIVES[perspective]
    except KeyError:
        raise ValueError(f"unknown perspective {perspective!r}") from None
    sequences: list[tuple[int, ...]] = []
    labels: list[int] = []
    dropped = 0
    for p in passages:
        events = tuple(p.events if hasattr(p, "events") else p)
        label = 1 if any(e in outcome_ids for e in events) else -1
        kept = tuple(e for e in events if e not in outcome_ids)
        if not kept:
            dropped += 1
            continue
        sequences.append(kept)
        labels.append(label)
    if dropped:
        warnings.warn(
            f"{perspective}: dropped {dropped} passage(s) emptied by outcome-event removal",
            stacklevel=2,
        )
    return LabeledDataset(tuple(sequences), tuple(labels))


def load_event_stream(path) -> list[MatchStream]:
    """Read a `match_id,seq_no,event_id` CSV into one stream per match.

    Rows must be grouped by match and strictly increasing in seq_no within
    each match. A header row is recognized and skipped.
    """
    streams: list[MatchStream] = []
    cur_id: str | None = None
    cur_events: list[int] = []
    prev_seq = None
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if ln == 1 and parts[0].lower() == "match_id":
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{ln}: expected 'match_id,seq_no,event_id'")
            mid = parts[0]
            try:
                seq_no, eid = int(parts[1]), int(parts[2])
            except ValueError:
                raise ValueError(f"{path}:{ln}: bad integer in {line!r}") from None
            if mid != cur_id:
                if cur_id is not None:
                    streams.append(MatchStream(cur_id, tuple(cur_events)))
                if mid in seen:
                    raise ValueError(f"{path}:{ln}: match {mid!r} rows are not grouped")
                seen.add(mid)
                cur_id, cur_events, prev_seq = mid, [], None
            if prev_seq is not None and seq_no <= prev_seq:
                raise ValueError(
                    f"{path}:{ln}: seq_no {seq_no} not increasing within match {mid!r}"
                )
            cur_events.append(eid)
            prev_seq = seq_no
    if cur_id is not None:
        streams.append(MatchStream(cur_id, tuple(cur_events)))
    if not streams:
        raise ValueError(f"{path}: no events")
    return streams
