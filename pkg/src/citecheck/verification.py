"""The two verifier calls: abstract-level and passage-level verdicts.

Prompts come from the shipped templates with literal placeholder substitution
and nothing else; backends run at temperature 0; responses must be a JSON
object carrying a verdict token and reasoning.
"""
from __future__ import annotations

import json

from .core import PassageSet, StageResult, parse_label
from .errors import InvalidInput, MalformedResponse
from .llm import LLMBackend, strip_code_fences
from .prompts import PromptPair, render_pair

#: Separator used when a PassageSet is flattened for the prompt.
PASSAGE_SEPARATOR = "\n\n"


def render_abstract_prompt(claim: str, abstract: str) -> PromptPair:
    return render_pair("abstract_verdict", {"claim": claim, "abstract": abstract})


def render_passage_prompt(claim: str, passage: str, abstract: str | None = None) -> PromptPair:
    if abstract is None:
        return render_pair("passage_verdict_noabs", {"claim": claim, "passage": passage})
    return render_pair(
        "passage_verdict", {"claim": claim, "passage": passage, "abstract": abstract}
    )


def parse_verdict_response(raw: str) -> StageResult:
    """Strict parse of a verifier reply into a StageResult.

    Tolerates a surrounding markdown fence; anything else non-JSON, a missing
    verdict/reasoning key, or an unknown label is an error.
    """
    try:
        doc = json.loads(strip_code_fences(raw))
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"verifier returned non-JSON output: {raw[:120]!r}") from exc
    if not isinstance(doc, dict) or "verdict" not in doc or "reasoning" not in doc:
        raise MalformedResponse("verifier response missing verdict or reasoning")
    return StageResult(
        verdict=parse_label(str(doc["verdict"])),
        reasoning=str(doc["reasoning"]),
        raw_response=raw,
    )


def verify_abstract(claim: str, abstract: str, backend: LLMBackend) -> StageResult:
    """Abstract-level verdict (Phase 1)."""
    pair = render_abstract_prompt(claim, abstract)
    return parse_verdict_response(backend.complete(pair.system, pair.user))


def verify_passages(
    claim: str,
    passages: PassageSet | str,
    backend: LLMBackend,
    abstract: str | None = None,
) -> StageResult:
    """Passage-level verdict (Phase 2); passages are the primary evidence."""
    if isinstance(passages, PassageSet):
        if not passages:
            raise InvalidInput("verify_passages requires at least one passage")
        passage_text = passages.joined_text(PASSAGE_SEPARATOR)
    else:
        passage_text = passages
        if not passage_text:
            raise InvalidInput("verify_passages requires at least one passage")
    pair = render_passage_prompt(claim, passage_text, abstract)
    return parse_verdict_response(backend.complete(pair.system, pair.user))
