"""Action log ingestion and time slicing."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .errors import ConfigurationError, ParseError
from .schema import ActionEvent

log = logging.getLogger(__name__)

DAY = 86400


def _parse_timestamp(raw) -> float:
    if isinstance(raw, bool):
        raise ValueError("boolean timestamp")
    if isinstance(raw, (int, float)):
        return float(raw)
    text = str(raw).strip()
    try:
        return float(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def event_from_mapping(row: dict) -> ActionEvent:
    if "user" not in row or row["user"] in (None, ""):
        raise ValueError("missing user")
    if "timestamp" not in row:
        raise ValueError("missing timestamp")
    topics = row.get("topics") or []
    mentions = row.get("mentions") or []
    if isinstance(topics, str) or isinstance(mentions, str):
        raise ValueError("topics and mentions must be lists")
    return ActionEvent(
        user=str(row["user"]),
        timestamp=_parse_timestamp(row["timestamp"]),
        topics=frozenset(str(t) for t in topics),
        has_url=bool(row.get("has_url", False)),
        is_retweet=bool(row.get("is_retweet", False)),
        mentions=frozenset(str(m) for m in mentions),
    )


def event_to_mapping(ev: ActionEvent) -> dict:
    ts = int(ev.timestamp) if float(ev.timestamp).is_integer() else ev.timestamp
    return {
        "user": ev.user,
        "timestamp": ts,
        "topics": sorted(ev.topics),
        "has_url": ev.has_url,
        "is_retweet": ev.is_retweet,
        "mentions": sorted(ev.mentions),
    }


def read_action_log(path) -> list[ActionEvent]:
    """Read a line-delimited JSON action log."""
    path = Path(path)
    events = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if not isinstance(row, dict):
                    raise ValueError("expected a JSON object")
                events.append(event_from_mapping(row))
            except (ValueError, TypeError) as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    return events


def write_action_log(events: Iterable[ActionEvent], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ev in sorted(events, key=lambda e: (e.timestamp, e.user)):
            fh.write(json.dumps(event_to_mapping(ev), sort_keys=True) + "\n")


def default_origin(events: Iterable[ActionEvent], slice_duration: float = DAY) -> float:
    """Start of the slice window holding the earliest event (UTC-aligned)."""
    first = min(ev.timestamp for ev in events)
    return math.floor(first / slice_duration) * slice_duration


def slot_of(timestamp: float, origin: float, slice_duration: float) -> int:
    return int(math.floor((timestamp - origin) / slice_duration)) + 1


def slot_window(slot: int, origin: float, slice_duration: float) -> tuple[float, float]:
    start = origin + (slot - 1) * slice_duration
    return start, start + slice_duration


def slice_events(
    events: Iterable[ActionEvent],
    origin: float,
    slice_duration: float = DAY,
    topic: str | None = None,
) -> dict[int, dict]:
    """Group events into half-open slots ``[origin+(m-1)*d, origin+m*d)``.

    Returns ``{slot: {user: [events sorted by time]}}``. With ``topic`` only
    events carrying that topic are kept. Events before ``origin`` are dropped.
    """
    if not slice_duration > 0:
        raise ConfigurationError(f"slice duration must be positive, got {slice_duration}")
    slots: dict[int, dict] = defaultdict(lambda: defaultdict(list))
    early = 0
    for ev in events:
        if topic is not None and topic not in ev.topics:
            continue
        if ev.timestamp < origin:
            early += 1
            continue
        slots[slot_of(ev.timestamp, origin, slice_duration)][ev.user].append(ev)
    if early:
        log.warning("dropped %d event(s) before the slicing origin", early)
    out = {}
    for m in sorted(slots):
        out[m] = {u: sorted(evs, key=lambda e: e.timestamp) for u, evs in sorted(slots[m].items())}
    return out


def topic_actors(slotted: dict[int, dict], topic: str, slot: int) -> dict:
    """``{user: sorted action times}`` of users acting on ``topic`` in ``slot``."""
    out = {}
    for user, evs in slotted.get(slot, {}).items():
        times = [ev.timestamp for ev in evs if topic in ev.topics]
        if times:
            out[user] = tuple(sorted(times))
    return out


def all_topics(events: Iterable[ActionEvent]) -> list[str]:
    topics = set()
    for ev in events:
        topics |= ev.topics
    return sorted(topics)
