"""HTTP transport with live, record, and replay modes plus an in-run cache.

Replay mode never opens a network connection: every call is a fixture lookup,
and a missing fixture is an error. The request cache deduplicates identical
(source, method, url, params) calls within one run and is never persisted.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any

import httpx

from .clocks import SystemClock
from .errors import ReplayMiss, TransportError
from .fixtures import FixtureStore, decode_body, encode_body
from .ratelimit import RateLimiter, RatePolicy, with_retry_429

MODES = ("live", "record", "replay")


@dataclass(frozen=True)
class TransportResponse:
    status: int
    content_type: str
    body: bytes

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")


class RequestCache:
    """In-memory per-run cache; hit counts are tracked per thread so each
    pipeline instance can report its own tally."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[str, TransportResponse] = {}
        self._local = threading.local()

    def get(self, key: str) -> TransportResponse | None:
        with self._lock:
            response = self._entries.get(key)
        if response is not None:
            self._local.hits = self.local_hits() + 1
        return response

    def put(self, key: str, response: TransportResponse) -> None:
        with self._lock:
            self._entries[key] = response

    def local_hits(self) -> int:
        return getattr(self._local, "hits", 0)

    def reset_local_hits(self) -> None:
        self._local.hits = 0


@dataclass
class Transport:
    """Dispatches GET requests for the scholarly clients.

    Live and record modes route through the per-source rate limiter and the
    429 retry policy; replay mode reads fixtures directly, so replays are
    hermetic and fast.
    """

    mode: str = "live"
    fixture_dir: str | None = None
    policy: RatePolicy = field(default_factory=RatePolicy)
    clock: Any = field(default_factory=SystemClock)
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown transport mode: {self.mode}")
        if self.mode in ("record", "replay") and not self.fixture_dir:
            raise ValueError(f"{self.mode} mode requires a fixture directory")
        self._store = FixtureStore(self.fixture_dir) if self.fixture_dir else None
        self._limiter = RateLimiter(self.policy, self.clock)
        self.cache = RequestCache()

    def request(
        self,
        source: str,
        url: str,
        params: dict[str, str] | None = None,
        headers: dict[str, str] | None = None,
    ) -> TransportResponse:
        # Headers carry credentials and are deliberately excluded from the
        # fixture key so replays do not depend on the environment.
        params = dict(params or {})
        key_fields = {"source": source, "method": "GET", "url": url, "params": params}
        cache_key = f"{source}|GET|{url}|{sorted(params.items())!r}"

        cached = self.cache.get(cache_key)
        if cached is not None:
            return cached

        if self.mode == "replay":
            response = self._replay(key_fields)
        else:
            self._limiter.acquire(source)
            response = with_retry_429(
                lambda: self._send(url, params, headers),
                self.policy,
                self.clock,
                status_of=lambda r: r.status,
            )
            if self.mode == "record" and self._store is not None:
                self._store.put(
                    "http",
                    key_fields,
                    {
                        "status": response.status,
                        "content_type": response.content_type,
                        **encode_body(response.body),
                    },
                )
        self.cache.put(cache_key, response)
        return response

    def _replay(self, key_fields: dict[str, Any]) -> TransportResponse:
        assert self._store is not None
        doc = self._store.get("http", key_fields)
        if doc is None:
            raise ReplayMiss(
                f"no http fixture for {key_fields['url']} params={key_fields['params']}"
            )
        return TransportResponse(
            status=int(doc["status"]),
            content_type=doc.get("content_type", ""),
            body=decode_body(doc),
        )

    def _send(
        self, url: str, params: dict[str, str], headers: dict[str, str] | None = None
    ) -> TransportResponse:
        try:
            response = httpx.get(
                url,
                params=params,
                headers=headers,
                timeout=self.timeout_s,
                follow_redirects=True,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"GET {url}: {exc}") from exc
        return TransportResponse(
            status=response.status_code,
            content_type=response.headers.get("content-type", ""),
            body=response.content,
        )
