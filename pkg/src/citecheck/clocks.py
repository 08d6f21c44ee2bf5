"""Injectable clocks so rate limiting and trace timing are testable and replayable."""
from __future__ import annotations

import threading
import time


class SystemClock:
    """Wall clock used in live and record modes."""

    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class FakeClock:
    """Deterministic clock: time advances only through sleep().

    Thread-safe; also records each requested sleep so tests can assert on
    backoff schedules.
    """

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()
        self.sleeps: list[float] = []

    def monotonic(self) -> float:
        with self._lock:
            return self._now

    def sleep(self, seconds: float) -> None:
        with self._lock:
            self.sleeps.append(seconds)
            if seconds > 0:
                self._now += seconds
