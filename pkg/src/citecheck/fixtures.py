"""On-disk request/response fixtures for record and replay modes.

Each recorded call becomes one JSON file named by the SHA-256 of its canonical
key, so replays are an exact content-addressed lookup. HTTP fixtures and LLM
fixtures share the store under different key kinds.
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
from pathlib import Path
from typing import Any

from .core import canonical_json


def fixture_key(kind: str, fields: dict[str, Any]) -> str:
    """Content hash identifying one request; stable across runs and platforms."""
    doc = {"kind": kind, **fields}
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


class FixtureStore:
    """One file per request hash under ``<root>/<kind>/<sha256>.json``."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path_for(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def get(self, kind: str, fields: dict[str, Any]) -> dict[str, Any] | None:
        path = self.path_for(kind, fixture_key(kind, fields))
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, kind: str, fields: dict[str, Any], payload: dict[str, Any]) -> Path:
        path = self.path_for(kind, fixture_key(kind, fields))
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"request": {"kind": kind, **fields}, **payload}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


def encode_body(body: bytes) -> dict[str, str]:
    """Store bodies as readable text when possible, base64 otherwise."""
    try:
        return {"body_text": body.decode("utf-8")}
    except UnicodeDecodeError:
        return {"body_b64": base64.b64encode(body).decode("ascii")}


def decode_body(doc: dict[str, Any]) -> bytes:
    if "body_text" in doc:
        return doc["body_text"].encode("utf-8")
    return base64.b64decode(doc.get("body_b64", ""))
