"""Discrete-event kernel: a clock, an ordered event queue and a seeded RNG."""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, TextIO


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(enum.Enum):
    MAINTENANCE = "maintenance"
    CHURN = "churn"
    WATCH = "watch"
    METRICS = "metrics"
    JOIN = "join"
    LEAVE = "leave"
    END = "end"


@dataclass(order=True, frozen=True)
class Event:
    fire_at: float
    sequence: int
    kind: EventKind = field(compare=False)
    node: Optional[int] = field(default=None, compare=False)
    payload: Any = field(default=None, compare=False)


Handler = Callable[[Event], None]


class Engine:
    """Single-threaded event loop.

    Events are popped in ``(fire_at, sequence)`` order; ``sequence`` is the
    insertion counter, so simultaneous events fire in the order they were
    scheduled. Handlers run in zero simulated time.
    """

    def __init__(self, seed: int = 0, trace: Optional[TextIO] = None) -> None:
        self.now = 0.0
        self.rng = random.Random(seed)
        self._queue: list[Event] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self._trace = trace
        self.processed = 0

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(
        self,
        fire_at: float,
        kind: EventKind,
        node: Optional[int] = None,
        payload: Any = None,
    ) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at t={fire_at!r} before clock t={self.now!r}"
            )
        event = Event(fire_at, self._seq, kind, node, payload)
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay: float, kind: EventKind, node: Optional[int] = None, payload: Any = None) -> Event:
        return self.schedule(self.now + delay, kind, node, payload)

    def __len__(self) -> int:
        return len(self._queue)

    def peek(self) -> Optional[Event]:
        return self._queue[0] if self._queue else None

    def log(self, kind: str, node: Optional[int], detail: str = "") -> None:
        """Append one ``time kind node detail`` line to the event trace, if enabled."""
        if self._trace is not None:
            node_s = "-" if node is None else str(node)
            self._trace.write(f"{self.now!r} {kind} {node_s} {detail}".rstrip() + "\n")

    def run_until(self, end: float) -> int:
        """Process every event with ``fire_at <= end``; leave the clock at ``end``."""
        count = 0
        queue = self._queue
        handlers = self._handlers
        while queue and queue[0].fire_at <= end:
            event = heapq.heappop(queue)
            assert event.fire_at >= self.now
            self.now = event.fire_at
            if self._trace is not None:
                self.log(event.kind.value, event.node)
            handler = handlers.get(event.kind)
            if handler is not None:
                handler(event)
            count += 1
        if end > self.now:
            self.now = end
        self.processed += count
        return count
