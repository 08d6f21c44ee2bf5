"""Claim-relevant passage selection from full text.

The document is chunked (3,000 characters, 200 overlap, section-aware), each
chunk and the claim are embedded, and the top-k chunks by cosine similarity
at or above the threshold become the evidence passages. An LLM line-range
extractor is available as an alternative selection path.
"""
from __future__ import annotations

import json
import math
import re
import zlib
from dataclasses import dataclass
from typing import Protocol, Sequence

from .core import Passage, PassageSet
from .errors import (
    DimensionMismatch,
    EmptyDocument,
    InvalidRanges,
    MalformedResponse,
    ProviderError,
)
from .llm import LLMBackend, strip_code_fences

_HEADING_RE = re.compile(r"^(#{1,6}\s+\S.*|[A-Z][A-Z0-9 \t\-:]{2,79})$")


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 3_000
    overlap: int = 200
    section_aware: bool = True

    def __post_init__(self):
        if not 0 < self.overlap < self.chunk_size:
            raise ValueError("require 0 < overlap < chunk_size")


@dataclass(frozen=True)
class SelectionConfig:
    k: int = 2
    cosine_threshold: float = 0.50

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.cosine_threshold <= 1.0:
            raise ValueError("cosine_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class Chunk:
    text: str
    start: int
    end: int


def _section_breaks(text: str) -> list[int]:
    """Character offsets where a heading line starts (markdown or all-caps)."""
    breaks: list[int] = []
    offset = 0
    for line in text.split("\n"):
        stripped = line.strip()
        if stripped and _HEADING_RE.match(stripped) and any(c.isalpha() for c in stripped):
            if offset > 0:
                breaks.append(offset)
        offset += len(line) + 1
    return breaks


def chunk_document(text: str, cfg: ChunkingConfig) -> list[Chunk]:
    """Overlapping chunks whose ranges cover [0, len(text)).

    Section headings force a chunk break and restart the stride, so chunks
    never straddle a detected section boundary.
    """
    if not text:
        raise EmptyDocument("cannot chunk an empty document")
    boundaries = [0]
    if cfg.section_aware:
        boundaries.extend(b for b in _section_breaks(text) if 0 < b < len(text))
    boundaries.append(len(text))
    boundaries = sorted(set(boundaries))

    chunks: list[Chunk] = []
    for seg_start, seg_end in zip(boundaries, boundaries[1:]):
        position = seg_start
        while True:
            end = min(position + cfg.chunk_size, seg_end)
            chunks.append(Chunk(text=text[position:end], start=position, end=end))
            if end >= seg_end:
                break
            position = end - cfg.overlap
    return chunks


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class HashedTfEmbedding:
    """Deterministic local fallback: hashed term frequencies, L2-normalized.

    Token buckets use CRC-32 so vectors are identical across processes and
    platforms; texts without tokens map to the zero vector.
    """

    def __init__(self, dimension: int = 1_024):
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._embed_one(text) for text in texts]

    def _embed_one(self, text: str) -> list[float]:
        vector = [0.0] * self.dimension
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            bucket = zlib.crc32(token.encode("utf-8")) % self.dimension
            vector[bucket] += 1.0
        norm = math.sqrt(sum(v * v for v in vector))
        if norm > 0:
            vector = [v / norm for v in vector]
        return vector


class HttpEmbeddingProvider:
    """Remote provider speaking the documented HTTP+JSON interface:
    request {"texts": [...]}, response {"vectors": [[...], ...]}."""

    def __init__(self, endpoint: str, timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        import httpx

        try:
            response = httpx.post(
                self.endpoint, json={"texts": list(texts)}, timeout=self.timeout_s
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"embedding endpoint failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(f"embedding endpoint returned HTTP {response.status_code}")
        vectors = response.json().get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError("embedding endpoint returned a malformed vector list")
        return [[float(x) for x in vec] for vec in vectors]


def embed_texts(texts: Sequence[str], provider: EmbeddingProvider) -> list[list[float]]:
    """One vector per text; every vector must share one dimension."""
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise ProviderError("provider returned the wrong number of vectors")
    dimensions = {len(vec) for vec in vectors}
    if len(dimensions) > 1:
        raise DimensionMismatch(f"mixed embedding dimensions: {sorted(dimensions)}")
    return vectors


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; zero vectors yield 0 rather than dividing by zero."""
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def select_passages(
    claim: str,
    chunks: Sequence[Chunk],
    provider: EmbeddingProvider,
    cfg: SelectionConfig,
) -> PassageSet:
    """Top-k chunks by cosine similarity to the claim, threshold applied.

    Ties break toward the earlier document position; fewer than k (or zero)
    passages is a legitimate outcome.
    """
    if not chunks:
        return PassageSet(passages=())
    vectors = embed_texts([claim] + [c.text for c in chunks], provider)
    claim_vec, chunk_vecs = vectors[0], vectors[1:]
    scored = [
        (cosine(claim_vec, vec), index)
        for index, vec in enumerate(chunk_vecs)
    ]
    kept = [(sim, index) for sim, index in scored if sim >= cfg.cosine_threshold]
    kept.sort(key=lambda pair: (-pair[0], chunks[pair[1]].start))
    selected = kept[: cfg.k]
    return PassageSet(
        passages=tuple(
            Passage(
                text=chunks[index].text,
                char_range=(chunks[index].start, chunks[index].end),
                similarity=sim,
            )
            for sim, index in selected
        )
    )


def number_lines(text: str) -> str:
    """1-based line numbering used by the LLM extractor's input rendering."""
    lines = text.split("\n")
    width = len(str(len(lines)))
    return "\n".join(f"{i:>{width}}: {line}" for i, line in enumerate(lines, start=1))


_EXTRACTOR_SYSTEM = (
    "You select evidence from a line-numbered paper.\n"
    "Given a CLAIM and the numbered text of a paper, return the line ranges most "
    "relevant to verifying the claim, best first.\n"
    "Rules:\n"
    "- Ranges are [start_line, end_line] with 1-based inclusive line numbers.\n"
    "- Ranges must not overlap and must stay within the text.\n"
    "- Return at most {max_ranges} ranges.\n"
    "Respond with ONLY a valid JSON array of ranges, e.g. [[10, 20], [40, 45]]."
)


def llm_extract_passages(
    claim: str,
    text: str,
    backend: LLMBackend,
    max_ranges: int = 2,
) -> PassageSet:
    """Ablation path: the backend picks ranked, non-overlapping line ranges.

    Passages are the verbatim lines of each returned range, in returned
    order. Out-of-bounds, inverted, or overlapping ranges raise InvalidRanges.
    """
    lines = text.split("\n")
    system = _EXTRACTOR_SYSTEM.replace("{max_ranges}", str(max_ranges))
    user = f"Claim: {claim}\n\nPaper:\n{number_lines(text)}"
    raw = backend.complete(system, user)
    try:
        ranges = json.loads(strip_code_fences(raw))
    except json.JSONDecodeError as exc:
        raise MalformedResponse("extractor returned non-JSON output") from exc
    if not isinstance(ranges, list) or not all(
        isinstance(r, list) and len(r) == 2 and all(isinstance(v, int) for v in r)
        for r in ranges
    ):
        raise MalformedResponse("extractor must return a JSON list of [start, end] pairs")

    for start, end in ranges:
        if start < 1 or end > len(lines):
            raise InvalidRanges(f"range [{start}, {end}] is out of bounds (1..{len(lines)})")
        if start > end:
            raise InvalidRanges(f"range [{start}, {end}] is inverted")
    ordered = sorted(ranges)
    for (_, prev_end), (next_start, _) in zip(ordered, ordered[1:]):
        if next_start <= prev_end:
            raise InvalidRanges("ranges overlap")

    line_offsets = [0]
    for line in lines[:-1]:
        line_offsets.append(line_offsets[-1] + len(line) + 1)

    passages = []
    for start, end in ranges[:max_ranges]:
        passage_text = "\n".join(lines[start - 1 : end])
        char_start = line_offsets[start - 1]
        passages.append(
            Passage(text=passage_text, char_range=(char_start, char_start + len(passage_text)), similarity=1.0)
        )
    return PassageSet(passages=tuple(passages))
