"""Discrete-event scheduler and lossy in-process transport.

All simulated time flows through the Scheduler: actors must never consult
wall clocks or spawn threads, which is what makes a scenario bit-for-bit
reproducible from its seed.

The transport models a degraded network over a TCP-like stream: delivery
within each direction stays FIFO (later sends never overtake earlier ones),
but any individual message may be dropped and every delivery takes a random
latency. Connection teardown is reliable and ordered after the last
delivery, like a FIN that eventually gets through.
"""

from __future__ import annotations

import heapq
import random
from typing import Callable, Optional

SIM_EPOCH_US = 1_700_000_000_000_000


class _Timer:
    __slots__ = ("at_us", "seq", "fn", "cancelled")

    def __init__(self, at_us: int, seq: int, fn) -> None:
        self.at_us = at_us
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def __lt__(self, other: "_Timer") -> bool:
        return (self.at_us, self.seq) < (other.at_us, other.seq)


class Scheduler:
    def __init__(self, start_us: int = SIM_EPOCH_US) -> None:
        self.now_us = start_us
        self._heap: list[_Timer] = []
        self._seq = 0

    def schedule_at(self, at_us: int, fn: Callable[[], None]) -> _Timer:
        self._seq += 1
        timer = _Timer(max(at_us, self.now_us), self._seq, fn)
        heapq.heappush(self._heap, timer)
        return timer

    def schedule_in(self, delay_us: int, fn: Callable[[], None]) -> _Timer:
        return self.schedule_at(self.now_us + max(0, int(delay_us)), fn)

    def cancel(self, timer: _Timer) -> None:
        timer.cancelled = True

    def run(self, until_us: Optional[int] = None, max_events: int = 2_000_000) -> bool:
        """Drain the event heap in time order. Returns False when stopped by
        the time bound with work still pending."""
        events = 0
        while self._heap:
            timer = self._heap[0]
            if until_us is not None and timer.at_us > until_us:
                return False
            heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            events += 1
            if events > max_events:
                raise RuntimeError("simulation runaway: too many events")
            self.now_us = timer.at_us
            timer.fn()
        return True

    @property
    def pending(self) -> int:
        return sum(1 for t in self._heap if not t.cancelled)


class _Direction:
    """One direction of a connection: seeded loss + latency, FIFO delivery."""

    def __init__(self, scheduler: Scheduler, rng: random.Random,
                 latency_us: tuple[int, int], drop_prob: float,
                 partitions_us: list[tuple[int, int]]) -> None:
        self._scheduler = scheduler
        self._rng = rng
        self._latency_us = latency_us
        self._drop_prob = drop_prob
        self._partitions = partitions_us
        self._last_delivery = 0
        self.deliver: Optional[Callable] = None
        self.closed = False

    def _blocked(self, now: int) -> bool:
        return any(lo <= now <= hi for lo, hi in self._partitions)

    def send(self, msg) -> None:
        now = self._scheduler.now_us
        if self.closed or self._blocked(now) or self._rng.random() < self._drop_prob:
            return
        latency = self._rng.randint(*self._latency_us)
        at = max(now + latency, self._last_delivery)
        self._last_delivery = at

        def fire():
            if not self.closed and self.deliver is not None:
                self.deliver(msg)

        self._scheduler.schedule_at(at, fire)

    def close_after_pending(self, on_close: Callable[[], None]) -> None:
        """Reliable ordered teardown: fires after the last queued delivery."""
        now = self._scheduler.now_us
        at = max(now + self._latency_us[1], self._last_delivery + 1)

        def fire():
            if not self.closed:
                self.closed = True
                on_close()

        self._scheduler.schedule_at(at, fire)


class SimConnection:
    """A bidirectional lossy pipe between one client and the server."""

    def __init__(self, scheduler: Scheduler, rng: random.Random,
                 latency_us: tuple[int, int], drop_prob: float,
                 partitions_us: list[tuple[int, int]]) -> None:
        # Independent RNG streams per direction keep draws order-independent.
        self.c2s = _Direction(scheduler, random.Random(rng.getrandbits(64)),
                              latency_us, drop_prob, partitions_us)
        self.s2c = _Direction(scheduler, random.Random(rng.getrandbits(64)),
                              latency_us, drop_prob, partitions_us)

    def client_send(self, msg) -> None:
        self.c2s.send(msg)

    def server_send(self, msg) -> None:
        self.s2c.send(msg)

    def close_from_server(self, on_client_closed: Callable[[], None]) -> None:
        self.s2c.close_after_pending(on_client_closed)
        self.c2s.closed = True

    def close_from_client(self, on_server_closed: Callable[[], None]) -> None:
        self.c2s.close_after_pending(on_server_closed)
        self.s2c.closed = True


class SimTransport:
    def __init__(self, scheduler: Scheduler, seed: int,
                 latency_range_s: tuple[float, float] = (0.005, 0.200),
                 drop_prob: float = 0.0,
                 partitions_s: Optional[list[tuple[float, float]]] = None) -> None:
        self._scheduler = scheduler
        self._rng = random.Random(seed)
        self._latency_us = (int(latency_range_s[0] * 1e6), int(latency_range_s[1] * 1e6))
        self._drop_prob = drop_prob
        base = scheduler.now_us
        self._partitions_us = [
            (base + int(lo * 1e6), base + int(hi * 1e6))
            for lo, hi in (partitions_s or [])
        ]

    def connect(self) -> SimConnection:
        return SimConnection(self._scheduler, self._rng, self._latency_us,
                             self._drop_prob, self._partitions_us)
