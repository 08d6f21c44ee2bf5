"""Prompt templates shipped with the package, rendered by literal substitution.

Templates live under ``templates/`` and are loaded verbatim; rendering is a
single pass that replaces ``{name}`` placeholders from a mapping and nothing
else, so substituted values are never re-expanded and the JSON braces inside
the templates stay untouched.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

_PLACEHOLDER_RE = re.compile(r"\{(claim|abstract|passage|citation|title)\}")

TEMPLATE_NAMES = (
    "abstract_verdict_system",
    "abstract_verdict_user",
    "passage_verdict_system",
    "passage_verdict_user",
    "passage_verdict_noabs_system",
    "passage_verdict_noabs_user",
    "abstract_search_system",
    "abstract_search_user",
    "fulltext_search_system",
    "fulltext_search_user",
    "citation_parse_system",
    "citation_parse_user",
)

_cache: dict[str, str] = {}


def template_bytes(name: str) -> bytes:
    """Raw template file contents, for fidelity checks against golden copies."""
    path = resources.files(__package__).joinpath("templates", f"{name}.txt")
    return path.read_bytes()


def load_template(name: str) -> str:
    """Template text with the single trailing newline of the file removed."""
    if name not in _cache:
        text = template_bytes(name).decode("utf-8")
        if text.endswith("\n"):
            text = text[:-1]
        _cache[name] = text
    return _cache[name]


def render(template: str, mapping: dict[str, str]) -> str:
    """Replace each ``{name}`` placeholder with mapping[name] in one pass."""

    def sub(match: re.Match) -> str:
        key = match.group(1)
        if key in mapping:
            return mapping[key]
        return match.group(0)

    return _PLACEHOLDER_RE.sub(sub, template)


@dataclass(frozen=True)
class PromptPair:
    """A system + user message pair ready to send to a backend."""

    system: str
    user: str


def render_pair(name: str, mapping: dict[str, str]) -> PromptPair:
    return PromptPair(
        system=render(load_template(f"{name}_system"), mapping),
        user=render(load_template(f"{name}_user"), mapping),
    )
