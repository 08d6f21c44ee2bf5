"""Citation parsing: a deterministic pattern pass plus an optional LLM parser.

Pattern-extracted identifiers always win over LLM output; the LLM mainly
contributes titles, which patterns cannot recover.
"""
from __future__ import annotations

import json
import re

from .core import ParsedCitation
from .errors import MalformedResponse, Unparseable
from .llm import LLMBackend, strip_code_fences
from .prompts import render_pair

# New-style arXiv id: YYMM (month 01-12), dot, 4-5 digits, optional version.
_ARXIV_RE = re.compile(r"\b(\d{2}(?:0[1-9]|1[0-2])\.\d{4,5}(?:v\d+)?)\b")
# DOI: 10.<4-9 digit registrant>/<suffix>, stopping at whitespace or a closing bracket.
_DOI_RE = re.compile(r"\b(10\.\d{4,9}/[^\s\])}>]+)")
_URL_RE = re.compile(r"https?://[^\s\])}>\"']+")
_DOI_RESOLVER_HOSTS = ("doi.org/", "dx.doi.org/", "www.doi.org/")

_PARSER_KEYS = ("arxiv_id", "doi", "url", "title")


def _strip_trailing_punct(value: str) -> str:
    return value.rstrip(".,;")


def extract_identifiers(raw: str) -> ParsedCitation:
    """Pure pattern pass over the raw citation string; absent patterns yield absent fields."""
    arxiv_match = _ARXIV_RE.search(raw)
    doi_match = _DOI_RE.search(raw)
    doi = _strip_trailing_punct(doi_match.group(1)) if doi_match else None

    url = None
    for match in _URL_RE.finditer(raw):
        candidate = _strip_trailing_punct(match.group(0))
        host_and_path = candidate.split("://", 1)[-1]
        if any(host_and_path.startswith(host) for host in _DOI_RESOLVER_HOSTS):
            continue
        url = candidate
        break

    return ParsedCitation(
        arxiv_id=arxiv_match.group(1) if arxiv_match else None,
        doi=doi,
        url=url,
        title=None,
    )


def llm_parse_citation(raw: str, backend: LLMBackend) -> ParsedCitation:
    """Ask a backend for the four retrieval fields as strict JSON.

    Empty-string values map to absent fields. Raises MalformedResponse when
    the reply is not a JSON object with all four keys; backend transport
    failures propagate as BackendError.
    """
    pair = render_pair("citation_parse", {"citation": raw})
    text = backend.complete(pair.system, pair.user)
    try:
        doc = json.loads(strip_code_fences(text))
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"citation parser returned non-JSON output: {text[:120]!r}") from exc
    if not isinstance(doc, dict) or any(key not in doc for key in _PARSER_KEYS):
        raise MalformedResponse("citation parser response missing required keys")

    def clean(key: str) -> str | None:
        value = str(doc[key] or "").strip()
        return value or None

    return ParsedCitation(
        arxiv_id=clean("arxiv_id"),
        doi=clean("doi"),
        url=clean("url"),
        title=clean("title"),
    )


def parse_citation(raw: str, backend: LLMBackend | None = None) -> ParsedCitation:
    """Merge the pattern pass with the optional LLM pass.

    Pattern-derived arxiv_id/doi/url take precedence; the LLM fills whatever
    is still absent (in practice, the title). Raises Unparseable when neither
    pass produced a single field.
    """
    pattern = extract_identifiers(raw)
    llm = llm_parse_citation(raw, backend) if backend is not None else ParsedCitation()
    merged = ParsedCitation(
        arxiv_id=pattern.arxiv_id or llm.arxiv_id,
        doi=pattern.doi or llm.doi,
        url=pattern.url or llm.url,
        title=pattern.title or llm.title,
    )
    if merged.is_empty():
        raise Unparseable(f"no retrieval signals in citation: {raw[:120]!r}")
    return merged
