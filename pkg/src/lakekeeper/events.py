"""Mission event log: typed records with a strictly increasing sequence.

Every observable change in a mission is appended here exactly once, so a
client that replays the log from any sequence number reconstructs the same
state as one that watched live. Events are serialized one JSON object per
line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import FormatError

POSE_UPDATE = "pose_update"
NEW_SOUNDINGS_SUMMARY = "new_soundings_summary"
RASTER_UPDATED = "raster_updated"
CLUSTERS_UPDATED = "clusters_updated"
PLAN_UPDATED = "plan_updated"
PHASE_CHANGED = "phase_changed"
REPORT_READY = "report_ready"

EVENT_KINDS = (
    POSE_UPDATE,
    NEW_SOUNDINGS_SUMMARY,
    RASTER_UPDATED,
    CLUSTERS_UPDATED,
    PLAN_UPDATED,
    PHASE_CHANGED,
    REPORT_READY,
)


@dataclass(frozen=True)
class Event:
    """One log entry. ``seq`` is unique and strictly increasing per mission;
    ``clock`` is the mission clock in seconds at emission time."""

    seq: int
    clock: float
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise FormatError(f"unknown event kind {self.kind!r}")
        if self.seq < 0:
            raise FormatError(f"event seq must be non-negative, got {self.seq}")


def event_to_json(event: Event) -> dict:
    return {
        "seq": event.seq,
        "clock": event.clock,
        "kind": event.kind,
        "payload": event.payload,
    }


def event_from_json(obj: dict) -> Event:
    try:
        return Event(
            seq=int(obj["seq"]),
            clock=float(obj["clock"]),
            kind=obj["kind"],
            payload=obj.get("payload", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad event record: {exc}") from exc


class EventLog:
    """Append-only list of events with sequence bookkeeping.

    Sequence numbers are dense and start at 1, so a client that has seen
    nothing resumes with ``since=0`` and one that saw seq s resumes with
    ``since=s``; both get exactly the events they are missing.
    """

    def __init__(self) -> None:
        self._events: list[Event] = []
        self._next_seq = 1

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, index):
        return self._events[index]

    @property
    def last_seq(self) -> int:
        """Sequence number of the newest event, 0 when empty."""
        return self._next_seq - 1

    def append(self, clock: float, kind: str, payload: dict | None = None) -> Event:
        event = Event(self._next_seq, clock, kind, payload or {})
        self._events.append(event)
        self._next_seq += 1
        return event

    def since(self, seq: int) -> list[Event]:
        """Events with sequence strictly greater than ``seq``."""
        # seq values are dense from 1, so this is an index, not a scan.
        start = max(0, seq)
        return self._events[start:]


def write_events(events, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event_to_json(event), sort_keys=True))
            fh.write("\n")


def read_events(path: str) -> list[Event]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad event line: {exc}") from exc
            events.append(event_from_json(obj))
    for prev, cur in zip(events, events[1:]):
        if cur.seq <= prev.seq:
            raise FormatError(
                f"event sequence not increasing: {prev.seq} then {cur.seq}"
            )
    return events
