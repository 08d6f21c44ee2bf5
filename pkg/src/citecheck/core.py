"""Shared domain types: the three-way verdict label, evidence records, results, traces.

All types here are immutable value objects and safe to share between threads.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

from .errors import UnknownLabel

EXTERNAL_NEI = "NOT_ENOUGH_INFO"


class VerdictLabel(enum.Enum):
    """Three-way verdict. NEI serializes externally as NOT_ENOUGH_INFO."""

    SUPPORTS = "SUPPORTS"
    CONTRADICTS = "CONTRADICTS"
    NEI = EXTERNAL_NEI

    def serialize(self) -> str:
        return self.value


_LABEL_ALIASES = {
    "SUPPORTS": VerdictLabel.SUPPORTS,
    "CONTRADICTS": VerdictLabel.CONTRADICTS,
    "NOT_ENOUGH_INFO": VerdictLabel.NEI,
    "NEI": VerdictLabel.NEI,
}


def parse_label(text: str) -> VerdictLabel:
    """Parse a verdict token, trimming whitespace and ignoring case.

    "NEI" is accepted as an alias of "NOT_ENOUGH_INFO"; anything outside the
    closed label set raises UnknownLabel.
    """
    key = str(text).strip().upper()
    try:
        return _LABEL_ALIASES[key]
    except KeyError:
        raise UnknownLabel(f"not a verdict label: {text!r}") from None


@dataclass(frozen=True)
class ClaimInstance:
    """A claim paired with its raw citation string and optional gold label."""

    id: str
    claim: str
    citation: str
    gold_label: VerdictLabel | None = None
    provided_abstract: str | None = None

    def __post_init__(self):
        if not self.claim.strip():
            raise ValueError("claim must be non-empty")
        if not self.citation.strip():
            raise ValueError("citation must be non-empty")


@dataclass(frozen=True)
class ParsedCitation:
    """Structured retrieval signals extracted from a citation string."""

    arxiv_id: str | None = None
    doi: str | None = None
    url: str | None = None
    title: str | None = None

    def is_empty(self) -> bool:
        return not (self.arxiv_id or self.doi or self.url or self.title)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "arxiv_id": self.arxiv_id,
            "doi": self.doi,
            "url": self.url,
            "title": self.title,
        }


#: Source tags an accepted abstract may carry, in cascade order.
ABSTRACT_SOURCES = (
    "arxiv",
    "s2_arxiv",
    "s2_doi",
    "openalex_doi",
    "s2_title",
    "crossref_title",
    "openalex_title",
    "pubmed_title",
    "url_direct",
    "llm_search",
)

#: Source tags an accepted full-text document may carry, in cascade order.
FULLTEXT_SOURCES = (
    "url_direct",
    "arxiv_html",
    "arxiv_pdf",
    "s2_oa_pdf",
    "pmc_xml",
    "llm_search",
)


@dataclass(frozen=True)
class AbstractEvidence:
    """An accepted abstract plus where it came from and how well it matched."""

    abstract_text: str
    matched_title: str
    source: str
    similarity: float

    def __post_init__(self):
        if not self.abstract_text:
            raise ValueError("abstract_text must be non-empty")
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must lie in [0, 1]")


@dataclass(frozen=True)
class FullTextDocument:
    """Accepted full-text content after extraction and truncation."""

    text: str
    source: str
    format: str

    @property
    def char_count(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class Passage:
    text: str
    char_range: tuple[int, int]
    similarity: float


@dataclass(frozen=True)
class PassageSet:
    """Selected passages, ordered by non-increasing similarity."""

    passages: tuple[Passage, ...]

    def __post_init__(self):
        sims = [p.similarity for p in self.passages]
        if any(a < b for a, b in zip(sims, sims[1:])):
            raise ValueError("passages must be ordered by non-increasing similarity")

    def __len__(self) -> int:
        return len(self.passages)

    def __bool__(self) -> bool:
        return bool(self.passages)

    def joined_text(self, separator: str = "\n\n") -> str:
        return separator.join(p.text for p in self.passages)


@dataclass(frozen=True)
class StageResult:
    """One verifier call: parsed verdict, its reasoning, and the raw text."""

    verdict: VerdictLabel
    reasoning: str
    raw_response: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.serialize(),
            "reasoning": self.reasoning,
            "raw_response": self.raw_response,
        }


@dataclass(frozen=True)
class StageAttempt:
    """One attempted step of a retrieval cascade or verifier invocation."""

    stage: str
    source: str
    outcome: str  # success | miss | error
    duration_s: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "source": self.source,
            "outcome": self.outcome,
            "duration_s": self.duration_s,
        }


@dataclass(frozen=True)
class RetrievalTrace:
    """Stage-level log of everything attempted while verifying one claim."""

    stages: tuple[StageAttempt, ...] = ()
    cache_hits: int = 0
    final_sources: dict[str, str | None] = field(
        default_factory=lambda: {"abstract": None, "fulltext": None}
    )
    final_reason: str | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "stages": [s.to_json_dict() for s in self.stages],
            "cache_hits": self.cache_hits,
            "final_sources": dict(self.final_sources),
            "final_reason": self.final_reason,
        }


@dataclass(frozen=True)
class VerificationResult:
    """Final verdict plus per-stage verdicts and the full decision trace."""

    final: VerdictLabel
    phase1: StageResult | None
    phase2: StageResult | None
    escalated: bool
    trace: RetrievalTrace

    def __post_init__(self):
        if self.phase1 is not None:
            if self.escalated != (self.phase1.verdict is VerdictLabel.NEI):
                raise ValueError("escalated must hold iff phase1 verdict is NEI")
        if not self.escalated:
            if self.phase2 is not None:
                raise ValueError("phase2 must be absent without escalation")
            if self.phase1 is not None and self.final is not self.phase1.verdict:
                raise ValueError("final must equal phase1 verdict without escalation")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "final": self.final.serialize(),
            "phase1": self.phase1.to_json_dict() if self.phase1 else None,
            "phase2": self.phase2.to_json_dict() if self.phase2 else None,
            "escalated": self.escalated,
            "trace": self.trace.to_json_dict(),
        }


def canonical_json(payload: Any) -> str:
    """Deterministic JSON: sorted keys, compact separators, no ASCII escaping."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def result_from_json_dict(doc: dict[str, Any]) -> VerificationResult:
    """Rebuild a VerificationResult from its canonical JSON dict."""

    def stage_result(entry: dict[str, Any] | None) -> StageResult | None:
        if entry is None:
            return None
        return StageResult(
            verdict=parse_label(entry["verdict"]),
            reasoning=entry.get("reasoning", ""),
            raw_response=entry.get("raw_response", ""),
        )

    trace_doc = doc.get("trace") or {}
    trace = RetrievalTrace(
        stages=tuple(
            StageAttempt(
                stage=s["stage"],
                source=s["source"],
                outcome=s["outcome"],
                duration_s=float(s["duration_s"]),
            )
            for s in trace_doc.get("stages", [])
        ),
        cache_hits=int(trace_doc.get("cache_hits", 0)),
        final_sources=dict(trace_doc.get("final_sources", {"abstract": None, "fulltext": None})),
        final_reason=trace_doc.get("final_reason"),
    )
    return VerificationResult(
        final=parse_label(doc["final"]),
        phase1=stage_result(doc.get("phase1")),
        phase2=stage_result(doc.get("phase2")),
        escalated=bool(doc["escalated"]),
        trace=trace,
    )
