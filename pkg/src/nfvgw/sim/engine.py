"""Deterministic discrete-event loop and the global event log."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class LogLine:
    tick: int
    source: str
    event: str

    def __str__(self) -> str:
        return f"{self.tick},{self.source},{self.event}"


class EventLog:
    def __init__(self):
        self.lines: list[LogLine] = []

    def add(self, tick: int, source: str, event: str) -> None:
        if self.lines and tick < self.lines[-1].tick:
            raise ValueError(f"log tick went backwards: {tick} < {self.lines[-1].tick}")
        self.lines.append(LogLine(tick, source, event))

    def text(self) -> str:
        return "".join(f"{line}\n" for line in self.lines)

    def find(self, source: str | None = None, prefix: str = "") -> list[LogLine]:
        return [l for l in self.lines
                if (source is None or l.source == source) and l.event.startswith(prefix)]

    def __len__(self) -> int:
        return len(self.lines)


class Simulator:
    """Events fire in (tick, scheduling order); equal ticks never reorder."""

    def __init__(self, log: EventLog | None = None):
        self.now = 0
        self.log = log if log is not None else EventLog()
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def schedule(self, delay: int, fn: Callable[..., None], *args) -> None:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._queue, (self.now + delay, next(self._seq), lambda: fn(*args)))

    def at(self, tick: int, fn: Callable[..., None], *args) -> None:
        self.schedule(tick - self.now, fn, *args)

    def emit(self, source: str, event: str) -> None:
        self.log.add(self.now, source, event)

    def pending(self) -> int:
        return len(self._queue)

    def run(self, until: int | None = None) -> int:
        """Process events (up to tick ``until``, inclusive); returns the final tick."""
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                break
            tick, _, fn = heapq.heappop(self._queue)
            self.now = tick
            fn()
        return self.now
