"""
Deterministic discrete-event engine.

Events are ordered by ``(fire_at, kind priority, seq)``, so two events
scheduled for the same instant are processed in a fixed order:

>>> engine = SimEngine()
>>> engine.schedule_event(5.0, EventKind.AGENT_TICK)
0
>>> engine.schedule_event(5.0, EventKind.SUBMIT)
1
>>> [entry.kind.value for entry in engine.run_until(10)]
['Submit', 'AgentTick']
>>> engine.clock
10.0

"""

import heapq
import logging
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from itertools import count
from threading import Lock
from typing import Any
from typing import Callable
from typing import Dict
from typing import Iterator
from typing import List
from typing import Mapping
from typing import Optional
from typing import Tuple

from .exceptions import SchedulingInPast

logger = logging.getLogger(__name__)

EventId = int


class EventKind(Enum):
    SUBMIT = "Submit"
    MAIN_CYCLE = "MainCycle"
    BACKFILL_CYCLE = "BackfillCycle"
    AGENT_TICK = "AgentTick"
    TASK_DISPATCHED = "TaskDispatched"
    JOB_COMPLETED = "JobCompleted"
    PREEMPTION_DONE = "PreemptionDone"
    QUOTA_UPDATED = "QuotaUpdated"

    @property
    def priority(self) -> int:
        return _KIND_PRIORITY.get(self, 4)


_KIND_PRIORITY = {
    EventKind.SUBMIT: 0,
    EventKind.MAIN_CYCLE: 1,
    EventKind.BACKFILL_CYCLE: 2,
    EventKind.AGENT_TICK: 3,
}


def describe(value: Any) -> str:
    """Stable text rendering used by the event log serializer.

    >>> describe({"b": 2.5, "a": [1, 2]})
    'a=[1, 2] b=2.500000'

    """
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, Mapping):
        return " ".join(f"{k}={describe(v)}" for k, v in sorted(value.items()))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(describe(v) for v in value) + "]"
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


@dataclass(frozen=True)
class Event:
    fire_at: float
    kind: EventKind
    seq: EventId
    payload: Mapping[str, Any] = field(default_factory=dict)

    @property
    def sort_key(self) -> Tuple[float, int, int]:
        return (self.fire_at, self.kind.priority, self.seq)


@dataclass(frozen=True)
class LogEntry:
    event: Event
    delta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def time(self) -> float:
        return self.event.fire_at

    @property
    def kind(self) -> EventKind:
        return self.event.kind

    def row(self) -> Tuple[str, ...]:
        return (
            str(self.event.seq),
            f"{self.time:.6f}",
            self.kind.value,
            describe(self.event.payload),
            describe(self.delta),
        )


class EventLog:
    """Append-only record of processed events, in processing order."""

    def __init__(self):
        self._entries: List[LogEntry] = []

    def append(self, entry: LogEntry):
        self._entries.append(entry)

    def __iter__(self) -> Iterator[LogEntry]:
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, index):
        return self._entries[index]

    def __repr__(self):
        return f"{type(self).__name__}({len(self._entries)} entries)"

    def of_kind(self, *kinds: EventKind) -> List[LogEntry]:
        return [entry for entry in self._entries if entry.kind in kinds]


Handler = Callable[[Event], Optional[Mapping[str, Any]]]


class SimEngine:
    """Virtual clock plus a priority queue of pending events.

    Handlers are registered per :class:`EventKind` and return a small mapping
    summarizing the state change they made, which is stored in the log.
    Listeners are notified after each processed event through an optional
    ``after_event(entry, engine)`` method.
    """

    def __init__(self, start: float = 0.0):
        self.clock = float(start)
        self.log = EventLog()
        self._queue: List[Tuple[float, int, int, Event]] = []
        self._seq = count()
        self._handlers: Dict[EventKind, Handler] = {}
        self._listeners: List[Any] = []
        self._processing = Lock()

    def __repr__(self):
        return f"{type(self).__name__}(clock={self.clock!r}, pending={len(self._queue)})"

    @property
    def pending(self) -> int:
        return len(self._queue)

    def on(self, kind: EventKind, handler: Handler) -> Handler:
        self._handlers[kind] = handler
        return handler

    def add_listener(self, *listeners: Any) -> "SimEngine":
        self._listeners.extend(listeners)
        return self

    def schedule_event(
        self, t: float, kind: EventKind, payload: "Mapping[str, Any] | None" = None
    ) -> EventId:
        t = float(t)
        if t < self.clock:
            raise SchedulingInPast(t, self.clock)
        event = Event(fire_at=t, kind=kind, seq=next(self._seq), payload=payload or {})
        heapq.heappush(self._queue, (t, kind.priority, event.seq, event))
        return event.seq

    def run_until(self, t_end: float) -> EventLog:
        """Process every queued event with ``fire_at <= t_end``, then move the clock to
        ``t_end``.

        If a handler raises, the remaining queue is discarded and the exception
        propagates.
        """
        # A handler calling back into ``run_until`` only enqueues; the outer loop processes.
        if not self._processing.acquire(blocking=False):
            return self.log

        try:
            while self._queue and self._queue[0][0] <= t_end:
                event = heapq.heappop(self._queue)[3]
                self.clock = event.fire_at
                try:
                    entry = self._process(event)
                except Exception:
                    self._queue.clear()
                    raise
                for listener in self._listeners:
                    after_event = getattr(listener, "after_event", None)
                    if after_event is not None:
                        after_event(entry, self)
            self.clock = max(self.clock, float(t_end))
        finally:
            self._processing.release()
        return self.log

    def _process(self, event: Event) -> LogEntry:
        handler = self._handlers.get(event.kind)
        delta = handler(event) if handler is not None else None
        entry = LogEntry(event=event, delta=delta or {})
        self.log.append(entry)
        return entry
