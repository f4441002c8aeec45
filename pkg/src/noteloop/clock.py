"""Injectable clocks and schedulers.

Two implementations of one small interface:

* :class:`VirtualScheduler` -- a discrete-event scheduler for replay.
  Time only advances when :meth:`run_until_idle` pops the next timer, so
  a replayed session is bit-deterministic regardless of host load.
* :class:`AsyncScheduler` -- a thin adapter over a running asyncio loop
  for live serving.  Uses the loop's monotonic clock.

Callbacks scheduled for the same instant fire in scheduling order.
"""

from __future__ import annotations

import asyncio
import heapq
from typing import Callable


class TimerHandle:
    """Cancellation token returned by ``call_at``/``call_later``."""

    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    """Interface shared by the virtual and live schedulers."""

    def now_ms(self) -> int:
        raise NotImplementedError

    def call_at(self, t_ms: int, fn: Callable[[], None]) -> TimerHandle:
        raise NotImplementedError

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> TimerHandle:
        return self.call_at(self.now_ms() + max(0, delay_ms), fn)


class VirtualScheduler(Scheduler):
    """Deterministic discrete-event scheduler.

    Timers are ordered by (time, insertion counter); ties therefore fire
    in the order they were scheduled, which pins down races such as a
    click arriving at the exact moment a double-click window expires.
    """

    def __init__(self, start_ms: int = 0) -> None:
        self._now = start_ms
        self._counter = 0
        self._heap: list[tuple[int, int, TimerHandle, Callable[[], None]]] = []

    def now_ms(self) -> int:
        return self._now

    def call_at(self, t_ms: int, fn: Callable[[], None]) -> TimerHandle:
        if t_ms < self._now:
            t_ms = self._now
        handle = TimerHandle()
        self._counter += 1
        heapq.heappush(self._heap, (t_ms, self._counter, handle, fn))
        return handle

    def run_until_idle(self, horizon_ms: int | None = None) -> int:
        """Pop timers until none remain (or the horizon is reached).

        Returns the virtual time after the last executed timer.
        """
        while self._heap:
            t_ms, _, handle, fn = self._heap[0]
            if horizon_ms is not None and t_ms > horizon_ms:
                break
            heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self._now = max(self._now, t_ms)
            fn()
        return self._now

    def pending(self) -> int:
        return sum(1 for _, _, h, _ in self._heap if not h.cancelled)


class AsyncScheduler(Scheduler):
    """Adapter over an asyncio event loop for live mode.

    ``now_ms`` is the loop's monotonic clock in milliseconds, so recorded
    latencies are immune to wall-clock adjustments.
    """

    def __init__(self, loop: asyncio.AbstractEventLoop | None = None) -> None:
        self._loop = loop or asyncio.get_event_loop()

    def now_ms(self) -> int:
        return int(self._loop.time() * 1000)

    def call_at(self, t_ms: int, fn: Callable[[], None]) -> TimerHandle:
        handle = TimerHandle()

        def runner() -> None:
            if not handle.cancelled:
                fn()

        delay = max(0.0, (t_ms - self.now_ms()) / 1000.0)
        self._loop.call_later(delay, runner)
        return handle

    def post_threadsafe(self, fn: Callable[[], None]) -> None:
        """Enqueue a callback from a worker thread."""
        self._loop.call_soon_threadsafe(fn)
