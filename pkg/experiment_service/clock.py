"""
Virtual clock and event queue for the audit protocol.

Time only moves when the runner pops the next event, so a 14-day protocol
runs in seconds while keeping the schedule's gaps intact. Events at the same
virtual time are ordered by (account_id, step index), which makes a run
replayable regardless of how accounts were registered.
"""

from __future__ import annotations

import datetime
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from utils.errors import DomainError


class VirtualClock:
    """Forward-only simulation clock. Advancing never waits on wall-clock time."""

    def __init__(self, start: datetime.datetime) -> None:
        self._start = start
        self._now = start

    @property
    def now(self) -> datetime.datetime:
        return self._now

    @property
    def start(self) -> datetime.datetime:
        return self._start

    def advance_to(self, timestamp: datetime.datetime) -> datetime.datetime:
        if timestamp < self._now:
            raise DomainError(f"[EXPERIMENT] Cannot move the clock back: {timestamp} < {self._now}")
        self._now = timestamp
        return self._now

    def elapsed(self) -> datetime.timedelta:
        return self._now - self._start


class StepKind(str, Enum):
    SESSION = "session"
    ACTIVITY = "activity"
    AFTER_ACTION = "after-action"
    BEFORE_SEARCH = "before-search"
    SEARCH = "search"
    AFTER_SEARCH = "after-search"


@dataclass(order=True)
class Event:
    """Heap entry ordered by (time, account_id, step, seq)."""

    time: datetime.datetime
    account_id: str
    step: int
    seq: int
    day: int = field(compare=False)
    kind: StepKind = field(compare=False)
    item_id: Optional[str] = field(default=None, compare=False)
    query_index: Optional[int] = field(default=None, compare=False)

    def describe(self) -> str:
        if self.item_id is not None:
            return f"{self.kind.value}:{self.item_id}"
        if self.query_index is not None:
            return f"{self.kind.value}:{self.query_index}"
        return self.kind.value


class EventQueue:
    def __init__(self) -> None:
        self._heap: List[Event] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(
        self,
        time: datetime.datetime,
        account_id: str,
        step: int,
        day: int,
        kind: StepKind,
        item_id: Optional[str] = None,
        query_index: Optional[int] = None,
    ) -> Event:
        self._seq += 1
        event = Event(time, account_id, step, self._seq, day, kind, item_id, query_index)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> Optional[datetime.datetime]:
        return self._heap[0].time if self._heap else None
