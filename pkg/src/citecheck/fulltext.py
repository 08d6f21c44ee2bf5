"""Phase 2 document acquisition: the full-text cascade and its acceptance gate.

Tier order: direct URL, arXiv (HTML preferred, PDF fallback), open-access
repositories (Semantic Scholar OA PDF, PubMed Central XML), then LLM-assisted
web search. A candidate is accepted once its extracted text is long enough
and does not look like a correction or erratum notice.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

from .core import FullTextDocument, ParsedCitation, StageAttempt
from .errors import (
    BackendError,
    CitecheckError,
    FullTextNotFound,
    MalformedResponse,
    NotFound,
)
from .llm import LLMBackend, strip_code_fences
from .prompts import render_pair
from .sources import ScholarlyClients
from .textextract import PdfExtractor, extract_text, format_from_content_type

REJECT_PREFIXES = (
    "correction for",
    "erratum",
    "corrigendum",
    "retraction notice",
    "author correction",
    "publisher's note",
)


@dataclass(frozen=True)
class FullTextGateConfig:
    min_chars: int = 1_500
    max_chars: int = 500_000
    reject_prefixes: tuple[str, ...] = REJECT_PREFIXES

    def __post_init__(self):
        if not 0 < self.min_chars < self.max_chars:
            raise ValueError("require 0 < min_chars < max_chars")


@dataclass(frozen=True)
class Rejection:
    reason: str  # too_short | one of the reject prefixes


def accept_fulltext(text: str, cfg: FullTextGateConfig) -> Rejection | None:
    """None means accepted; a Rejection value says why not."""
    if len(text) < cfg.min_chars:
        return Rejection("too_short")
    window = re.sub(r"\s+", " ", text[:200]).replace("’", "'").strip().lower()
    for prefix in cfg.reject_prefixes:
        if window.startswith(prefix):
            return Rejection(prefix.split()[0])
    return None


def llm_search_fulltext(
    title: str, backend: LLMBackend, retries: int = 2
) -> dict[str, str] | None:
    """Fallback URL lookup; None signals a clean negative result."""
    pair = render_pair("fulltext_search", {"title": title})
    text = _complete_with_retries(backend, pair.system, pair.user, retries)
    try:
        doc = json.loads(strip_code_fences(text))
    except json.JSONDecodeError as exc:
        raise MalformedResponse("fulltext search returned non-JSON output") from exc
    if not isinstance(doc, dict) or any(key not in doc for key in ("found", "url", "format")):
        raise MalformedResponse("fulltext search response missing required keys")
    if not doc["found"]:
        return None
    format = str(doc["format"]).lower()
    if format not in ("pdf", "xml", "html"):
        raise MalformedResponse(f"fulltext search returned unknown format {doc['format']!r}")
    return {"url": str(doc["url"]), "format": format}


def _complete_with_retries(backend: LLMBackend, system: str, user: str, retries: int) -> str:
    last: BackendError | None = None
    for _ in range(retries + 1):
        try:
            return backend.complete(system, user)
        except BackendError as exc:
            last = exc
    raise last if last is not None else BackendError("backend unavailable")


def retrieve_fulltext(
    parsed: ParsedCitation,
    clients: ScholarlyClients,
    cfg: FullTextGateConfig,
    *,
    search_backend: LLMBackend | None = None,
    search_retries: int = 2,
    pdf_extractor: PdfExtractor | None = None,
    timer: Callable[[], float] | None = None,
) -> tuple[FullTextDocument, list[StageAttempt]]:
    """Run the cascade; the first document passing the gate wins.

    Raises FullTextNotFound (with the attempt log attached) when exhausted.
    """
    attempts: list[StageAttempt] = []
    clock = timer or (lambda: 0.0)

    def attempt(source: str, fetch: Callable[[], tuple[bytes, str]], forced_format: str | None = None):
        started = clock()
        try:
            body, content_type = fetch()
        except NotFound:
            attempts.append(StageAttempt(f"fulltext:{source}", source, "miss", clock() - started))
            return None
        except CitecheckError:
            attempts.append(StageAttempt(f"fulltext:{source}", source, "error", clock() - started))
            return None
        format = forced_format or format_from_content_type(content_type)
        if format is None:
            attempts.append(
                StageAttempt(f"fulltext:{source}", source, "miss:unknown_format", clock() - started)
            )
            return None
        try:
            text = extract_text(body, format, cfg.max_chars, pdf_extractor)
        except CitecheckError:
            attempts.append(
                StageAttempt(f"fulltext:{source}", source, "error", clock() - started)
            )
            return None
        rejection = accept_fulltext(text, cfg)
        if rejection is not None:
            attempts.append(
                StageAttempt(
                    f"fulltext:{source}", source, f"miss:{rejection.reason}", clock() - started
                )
            )
            return None
        attempts.append(StageAttempt(f"fulltext:{source}", source, "success", clock() - started))
        return FullTextDocument(text=text, source=source, format=format)

    document: FullTextDocument | None = None
    if parsed.url:
        document = attempt(
            "url_direct",
            lambda: clients.fetch_url(parsed.url, source="web"),
            format_from_content_type("", parsed.url),
        )
        if document:
            return document, attempts
    if parsed.arxiv_id:
        document = attempt("arxiv_html", lambda: clients.arxiv_html(parsed.arxiv_id), "html")
        if document:
            return document, attempts
        document = attempt("arxiv_pdf", lambda: clients.arxiv_pdf(parsed.arxiv_id), "pdf")
        if document:
            return document, attempts

    s2_id = _s2_paper_id(parsed)
    if s2_id:
        document = attempt("s2_oa_pdf", lambda: _s2_oa_pdf(clients, s2_id), "pdf")
        if document:
            return document, attempts
    pmcid = _discover_pmcid(clients, parsed, attempts, clock)
    if pmcid:
        document = attempt("pmc_xml", lambda: (clients.pmc_fulltext_xml(pmcid), "application/xml"), "xml")
        if document:
            return document, attempts

    if search_backend is not None and parsed.title:
        document = attempt(
            "llm_search",
            lambda: _searched_fulltext(clients, parsed.title, search_backend, search_retries),
        )
        if document:
            return document, attempts

    raise FullTextNotFound(f"fulltext cascade exhausted for {parsed.to_json_dict()}", attempts)


def _s2_paper_id(parsed: ParsedCitation) -> str | None:
    if parsed.arxiv_id:
        bare = re.sub(r"v\d+$", "", parsed.arxiv_id)
        return f"arXiv:{bare}"
    if parsed.doi:
        return f"DOI:{parsed.doi}"
    return None


def _s2_oa_pdf(clients: ScholarlyClients, paper_id: str) -> tuple[bytes, str]:
    pdf_url = clients.s2_oa_pdf_url(paper_id)
    return clients.fetch_url(pdf_url, source="web")


def _discover_pmcid(
    clients: ScholarlyClients,
    parsed: ParsedCitation,
    attempts: list[StageAttempt],
    clock: Callable[[], float],
) -> str | None:
    """PMC ids come back from a PubMed title lookup when one is possible."""
    if not parsed.title:
        return None
    started = clock()
    try:
        record = clients.pubmed_title_search(parsed.title)
    except CitecheckError:
        attempts.append(
            StageAttempt("fulltext:pmc_lookup", "pmc_xml", "miss", clock() - started)
        )
        return None
    if not record.pmcid:
        attempts.append(
            StageAttempt("fulltext:pmc_lookup", "pmc_xml", "miss:no_pmcid", clock() - started)
        )
        return None
    return record.pmcid


def _searched_fulltext(
    clients: ScholarlyClients, title: str, backend: LLMBackend, retries: int
) -> tuple[bytes, str]:
    hit = llm_search_fulltext(title, backend, retries)
    if hit is None:
        raise NotFound("llm search returned a negative result")
    body, content_type = clients.fetch_url(hit["url"], source="web")
    return body, content_type or hit["format"]
