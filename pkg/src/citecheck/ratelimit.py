"""Per-source rate limiting and 429 retry with exponential backoff.

Consecutive dispatches to the same source are separated by at least the
configured minimum interval (1.0 s by default); different sources are
independent. HTTP 429 responses are retried up to three times with doubling
delays starting at 1.0 s.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, TypeVar

from .clocks import SystemClock
from .errors import RateLimitedExhausted

T = TypeVar("T")


@dataclass(frozen=True)
class RatePolicy:
    min_interval_s: float = 1.0
    max_retries_429: int = 3
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0
    llm_search_retries: int = 2

    def __post_init__(self):
        if self.min_interval_s <= 0:
            raise ValueError("min_interval_s must be > 0")
        if self.max_retries_429 < 0:
            raise ValueError("max_retries_429 must be >= 0")


class RateLimiter:
    """Serializes dispatch times per source; safe under concurrent callers."""

    def __init__(self, policy: RatePolicy, clock=None):
        self.policy = policy
        self.clock = clock or SystemClock()
        self._lock = threading.Lock()
        self._next_free: dict[str, float] = {}

    def acquire(self, source: str) -> float:
        """Block until the source slot is free; returns the dispatch time."""
        with self._lock:
            now = self.clock.monotonic()
            dispatch_at = max(now, self._next_free.get(source, 0.0))
            self._next_free[source] = dispatch_at + self.policy.min_interval_s
            wait = dispatch_at - now
        if wait > 0:
            self.clock.sleep(wait)
        return dispatch_at


def with_retry_429(
    call: Callable[[], T],
    policy: RatePolicy,
    clock=None,
    status_of: Callable[[T], int] = lambda r: r.status,
) -> T:
    """Run an idempotent call, retrying on HTTP 429 with doubling delays.

    Raises RateLimitedExhausted once 1 + max_retries_429 attempts have all
    returned 429; any other status passes through untouched.
    """
    clock = clock or SystemClock()
    delay = policy.backoff_base_s
    attempts = policy.max_retries_429 + 1
    for attempt in range(attempts):
        response = call()
        if status_of(response) != 429:
            return response
        if attempt < attempts - 1:
            clock.sleep(delay)
            delay *= policy.backoff_factor
    raise RateLimitedExhausted(f"still rate limited after {attempts} attempts")
