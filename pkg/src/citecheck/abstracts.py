"""Phase 1 evidence acquisition: the four-tier abstract cascade.

Tiers run in order (arXiv id, DOI, title search, fallback) and the cascade
halts at the first candidate passing the acceptance gate: abstract non-empty,
and for title-matched candidates a word-overlap similarity of at least tau
against the cited title. Identifier lookups are exact matches and skip the
similarity check.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

from .core import AbstractEvidence, ParsedCitation, StageAttempt
from .errors import (
    AbstractNotFound,
    BackendError,
    CitecheckError,
    MalformedResponse,
    NotFound,
)
from .llm import LLMBackend, strip_code_fences
from .prompts import render_pair
from .sources import CandidateRecord, ScholarlyClients
from .textextract import abstract_from_html

# Fixed high-frequency English function words; documented so similarity
# values are reproducible.
STOPWORDS = frozenset(
    """the a an of for with and or in on to by from is are at as that this
    their its we be was were which it not but have""".split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class TitleGateConfig:
    tau: float = 0.30
    stopwords: frozenset[str] = STOPWORDS

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


def title_tokens(title: str, stopwords: frozenset[str] = STOPWORDS) -> set[str]:
    """Lowercased alphanumeric tokens minus stopwords, as a set."""
    return {tok for tok in _TOKEN_RE.findall(title.lower()) if tok not in stopwords}


def title_similarity(
    retrieved: str, cited: str, stopwords: frozenset[str] = STOPWORDS
) -> float:
    """Word overlap |W(retrieved) ∩ W(cited)| / max(|W(cited)|, 1)."""
    retrieved_tokens = title_tokens(retrieved, stopwords)
    cited_tokens = title_tokens(cited, stopwords)
    return len(retrieved_tokens & cited_tokens) / max(len(cited_tokens), 1)


@dataclass(frozen=True)
class Rejection:
    reason: str  # empty_abstract | low_similarity


def accept_abstract(
    candidate: CandidateRecord,
    parsed: ParsedCitation,
    cfg: TitleGateConfig,
    *,
    exact_match: bool,
    source: str,
) -> AbstractEvidence | Rejection:
    """Gate one candidate: non-empty abstract, plus the tau check for
    title-matched tiers. Rejection is a value, not an error."""
    abstract = (candidate.abstract or "").strip()
    if not abstract:
        return Rejection("empty_abstract")
    similarity = 1.0
    if parsed.title:
        similarity = title_similarity(candidate.title, parsed.title, cfg.stopwords)
    if not exact_match and similarity < cfg.tau:
        return Rejection("low_similarity")
    return AbstractEvidence(
        abstract_text=abstract,
        matched_title=candidate.title,
        source=source,
        similarity=min(max(similarity, 0.0), 1.0),
    )


def llm_search_abstract(
    citation: str, backend: LLMBackend, retries: int = 2
) -> CandidateRecord | None:
    """Fallback web-search lookup; None signals a clean negative result."""
    pair = render_pair("abstract_search", {"citation": citation})
    text = _complete_with_retries(backend, pair.system, pair.user, retries)
    try:
        doc = json.loads(strip_code_fences(text))
    except json.JSONDecodeError as exc:
        raise MalformedResponse("abstract search returned non-JSON output") from exc
    required = ("found", "title", "abstract", "authors", "year", "source_url")
    if not isinstance(doc, dict) or any(key not in doc for key in required):
        raise MalformedResponse("abstract search response missing required keys")
    if not doc["found"]:
        return None
    return CandidateRecord(
        title=str(doc["title"] or ""),
        abstract=str(doc["abstract"] or "") or None,
        url=str(doc["source_url"] or "") or None,
    )


def _complete_with_retries(backend: LLMBackend, system: str, user: str, retries: int) -> str:
    last: BackendError | None = None
    for _ in range(retries + 1):
        try:
            return backend.complete(system, user)
        except BackendError as exc:
            last = exc
    raise last if last is not None else BackendError("backend unavailable")


def retrieve_abstract(
    parsed: ParsedCitation,
    clients: ScholarlyClients,
    cfg: TitleGateConfig,
    *,
    citation_text: str = "",
    search_backend: LLMBackend | None = None,
    search_retries: int = 2,
    timer: Callable[[], float] | None = None,
) -> tuple[AbstractEvidence, list[StageAttempt]]:
    """Run the cascade; first accepted candidate wins, every attempt is traced.

    Raises AbstractNotFound once all tiers are exhausted (the attempts list
    travels on the exception).
    """
    attempts: list[StageAttempt] = []
    clock = timer or (lambda: 0.0)

    def attempt(source: str, fetch: Callable[[], CandidateRecord], exact: bool):
        started = clock()
        try:
            candidate = fetch()
        except NotFound:
            attempts.append(StageAttempt(f"abstract:{source}", source, "miss", clock() - started))
            return None
        except CitecheckError:
            attempts.append(StageAttempt(f"abstract:{source}", source, "error", clock() - started))
            return None
        gated = accept_abstract(candidate, parsed, cfg, exact_match=exact, source=source)
        if isinstance(gated, Rejection):
            attempts.append(
                StageAttempt(f"abstract:{source}", source, f"miss:{gated.reason}", clock() - started)
            )
            return None
        attempts.append(StageAttempt(f"abstract:{source}", source, "success", clock() - started))
        return gated

    tiers: list[tuple[str, Callable[[], CandidateRecord], bool]] = []
    if parsed.arxiv_id:
        tiers.append(("arxiv", lambda: clients.arxiv_metadata(parsed.arxiv_id), True))
        tiers.append(("s2_arxiv", lambda: clients.s2_paper_by_arxiv(parsed.arxiv_id), True))
    if parsed.doi:
        tiers.append(("s2_doi", lambda: clients.s2_paper_by_doi(parsed.doi), True))
        tiers.append(("openalex_doi", lambda: clients.openalex_by_doi(parsed.doi), True))
    if parsed.title:
        tiers.append(("s2_title", lambda: clients.s2_title_search(parsed.title), False))
        tiers.append(("crossref_title", lambda: clients.crossref_title_search(parsed.title), False))
        tiers.append(("openalex_title", lambda: clients.openalex_title_search(parsed.title), False))
        tiers.append(("pubmed_title", lambda: clients.pubmed_title_search(parsed.title), False))
    if parsed.url:
        # The URL came from the citation itself, so like an identifier hit
        # there is no competing candidate title to compare against.
        tiers.append(("url_direct", lambda: _abstract_from_url(clients, parsed.url), True))
    if search_backend is not None and citation_text:
        tiers.append(
            (
                "llm_search",
                lambda: _searched_candidate(citation_text, search_backend, search_retries),
                not parsed.title,
            )
        )

    for source, fetch, exact in tiers:
        evidence = attempt(source, fetch, exact)
        if evidence is not None:
            return evidence, attempts
    raise AbstractNotFound(_not_found_message(parsed), attempts)


def _abstract_from_url(clients: ScholarlyClients, url: str) -> CandidateRecord:
    body, content_type = clients.fetch_url(url, source="web")
    if "html" not in content_type.lower():
        raise NotFound(f"no html abstract at {url}")
    abstract = abstract_from_html(body)
    if not abstract:
        raise NotFound(f"no abstract block found at {url}")
    return CandidateRecord(title="", abstract=abstract, url=url)


def _searched_candidate(citation: str, backend: LLMBackend, retries: int) -> CandidateRecord:
    candidate = llm_search_abstract(citation, backend, retries)
    if candidate is None:
        raise NotFound("llm search returned a negative result")
    return candidate


def _not_found_message(parsed: ParsedCitation) -> str:
    signals = {k: v for k, v in parsed.to_json_dict().items() if v}
    return f"abstract cascade exhausted for {signals}"
