"""LLM backends: a minimal text-in/text-out interface plus record/replay support.

All verification calls run at temperature 0; provider-specific knobs travel in
an opaque options map and are never interpreted here.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Any, Protocol

import httpx

from .errors import BackendError, ReplayMiss
from .fixtures import FixtureStore

DEFAULT_API_KEY_ENV = "CITECHECK_LLM_API_KEY"


def strip_code_fences(text: str) -> str:
    """Drop a surrounding markdown code fence, if any.

    The prompts forbid fences, but real backends add them anyway; removing
    them is lossless.
    """
    stripped = text.strip()
    if stripped.startswith("```"):
        stripped = re.sub(r"^```[a-zA-Z]*\n?", "", stripped)
        stripped = re.sub(r"\n?```$", "", stripped.strip())
    return stripped.strip()


class LLMBackend(Protocol):
    """System + user messages in, completion text out."""

    name: str

    def complete(self, system: str, user: str) -> str: ...


@dataclass
class HttpChatBackend:
    """OpenAI-style chat-completions client; temperature pinned to 0.

    The API key is read from the environment (``api_key_env``), never from
    config files or flags.
    """

    name: str
    endpoint: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    options: dict[str, Any] = field(default_factory=dict)
    timeout_s: float = 120.0

    def complete(self, system: str, user: str) -> str:
        payload: dict[str, Any] = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        payload.update(self.options)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = httpx.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
            )
        except httpx.HTTPError as exc:
            raise BackendError(f"backend {self.name}: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(
                f"backend {self.name}: HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            doc = response.json()
            return doc["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"backend {self.name}: unexpected completion payload") from exc


class ReplayLLMBackend:
    """Serves completions from fixtures; never contacts a provider.

    Keeps a thread-safe call log so tests can assert exactly which prompts
    were issued.
    """

    def __init__(self, name: str, store: FixtureStore):
        self.name = name
        self.store = store
        self._lock = threading.Lock()
        self.calls: list[tuple[str, str]] = []

    def complete(self, system: str, user: str) -> str:
        with self._lock:
            self.calls.append((system, user))
        doc = self.store.get("llm", {"backend": self.name, "system": system, "user": user})
        if doc is None:
            raise ReplayMiss(f"no llm fixture for backend {self.name}")
        return doc["text"]


class RecordingLLMBackend:
    """Wraps a live backend, saving every completion as a replayable fixture."""

    def __init__(self, inner: LLMBackend, store: FixtureStore):
        self.inner = inner
        self.name = inner.name
        self.store = store

    def complete(self, system: str, user: str) -> str:
        text = self.inner.complete(system, user)
        self.store.put(
            "llm",
            {"backend": self.name, "system": system, "user": user},
            {"text": text},
        )
        return text


class ScriptedLLMBackend:
    """Test double answering from a fixed queue; raises queued exceptions."""

    def __init__(self, name: str, responses: list[Any]):
        self.name = name
        self._responses = list(responses)
        self.calls: list[tuple[str, str]] = []

    def complete(self, system: str, user: str) -> str:
        self.calls.append((system, user))
        if not self._responses:
            raise BackendError(f"backend {self.name}: script exhausted")
        item = self._responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def save_llm_fixture(store: FixtureStore, backend_name: str, system: str, user: str, text: str):
    """Write one replayable completion; used by fixture builders."""
    store.put("llm", {"backend": backend_name, "system": system, "user": user}, {"text": text})
