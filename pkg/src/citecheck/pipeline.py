"""The staged orchestrator: parse, retrieve abstract, early-exit verdict,
escalate to full text, select passages, final verdict.

Phase 1 resolves the claim from abstract evidence; a NOT_ENOUGH_INFO verdict
is the escalation signal. Phase 2 retrieves the full text, selects passages,
and produces the final verdict; when no usable full text or passages exist,
the pipeline returns NOT_ENOUGH_INFO rather than guessing.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

from .abstracts import TitleGateConfig, retrieve_abstract
from .citations import extract_identifiers, llm_parse_citation
from .clocks import FakeClock, SystemClock
from .core import (
    ClaimInstance,
    ParsedCitation,
    RetrievalTrace,
    StageAttempt,
    StageResult,
    VerdictLabel,
    VerificationResult,
)
from .errors import (
    AbstractNotFound,
    BackendError,
    FullTextNotFound,
    InvalidInput,
    MalformedResponse,
)
from .fixtures import FixtureStore
from .fulltext import FullTextGateConfig, retrieve_fulltext
from .llm import (
    DEFAULT_API_KEY_ENV,
    HttpChatBackend,
    LLMBackend,
    RecordingLLMBackend,
    ReplayLLMBackend,
)
from .passages import (
    ChunkingConfig,
    EmbeddingProvider,
    HashedTfEmbedding,
    HttpEmbeddingProvider,
    SelectionConfig,
    chunk_document,
    select_passages,
)
from .ratelimit import RatePolicy
from .sources import ScholarlyClients
from .textextract import PdfExtractor
from .transport import Transport
from .verification import verify_abstract, verify_passages

EVIDENCE_MODES = ("provided-abstract", "retrieve")
BACKEND_ROLES = ("parser", "abstract_verifier", "passage_verifier", "search")


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "none"  # none | http
    model: str = ""
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    api_key_env: str = DEFAULT_API_KEY_ENV
    options: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EmbeddingSpec:
    kind: str = "fallback"  # fallback | http
    dimension: int = 1_024
    endpoint: str = ""


def _default_backends() -> dict[str, BackendSpec]:
    return {
        "parser": BackendSpec(kind="none"),
        "abstract_verifier": BackendSpec(kind="http"),
        "passage_verifier": BackendSpec(kind="http"),
        "search": BackendSpec(kind="none"),
    }


@dataclass(frozen=True)
class PipelineConfig:
    """Every threshold and knob in one place; see from_flat for the file keys."""

    title_gate: TitleGateConfig = field(default_factory=TitleGateConfig)
    fulltext_gate: FullTextGateConfig = field(default_factory=FullTextGateConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    rate_policy: RatePolicy = field(default_factory=RatePolicy)
    evidence_mode: str = "provided-abstract"
    workers: int = 4
    backends: dict[str, BackendSpec] = field(default_factory=_default_backends)
    embeddings: EmbeddingSpec = field(default_factory=EmbeddingSpec)

    def __post_init__(self):
        if self.evidence_mode not in EVIDENCE_MODES:
            raise ValueError(f"evidence_mode must be one of {EVIDENCE_MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_flat(cls, doc: dict[str, Any]) -> "PipelineConfig":
        """Build from the flat config-file document; unknown keys are errors."""
        doc = dict(doc)
        known = {
            "tau", "min_chars", "max_chars", "chunk_size", "overlap", "section_aware",
            "k", "cosine_threshold", "min_interval_s", "max_retries_429",
            "backoff_base_s", "backoff_factor", "llm_search_retries",
            "evidence_mode", "workers", "embedding_dimension", "backends",
        }
        unknown = set(doc) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")

        def pick(base, **keys):
            updates = {attr: doc[key] for attr, key in keys.items() if key in doc}
            return replace(base, **updates) if updates else base

        backends = _default_backends()
        for role, spec_doc in (doc.get("backends") or {}).items():
            if role not in BACKEND_ROLES:
                raise InvalidInput(f"unknown backend role: {role}")
            base = backends[role]
            allowed = {"kind", "model", "endpoint", "api_key_env", "options"}
            bad = set(spec_doc) - allowed
            if bad:
                raise InvalidInput(f"unknown backend keys for {role}: {sorted(bad)}")
            backends[role] = replace(base, **spec_doc)

        return cls(
            title_gate=pick(TitleGateConfig(), tau="tau"),
            fulltext_gate=pick(FullTextGateConfig(), min_chars="min_chars", max_chars="max_chars"),
            chunking=pick(
                ChunkingConfig(),
                chunk_size="chunk_size", overlap="overlap", section_aware="section_aware",
            ),
            selection=pick(SelectionConfig(), k="k", cosine_threshold="cosine_threshold"),
            rate_policy=pick(
                RatePolicy(),
                min_interval_s="min_interval_s", max_retries_429="max_retries_429",
                backoff_base_s="backoff_base_s", backoff_factor="backoff_factor",
                llm_search_retries="llm_search_retries",
            ),
            evidence_mode=doc.get("evidence_mode", "provided-abstract"),
            workers=doc.get("workers", 4),
            backends=backends,
            embeddings=EmbeddingSpec(dimension=doc.get("embedding_dimension", 1_024)),
        )


@dataclass
class PipelineDeps:
    """Constructed runtime collaborators for one run."""

    clients: ScholarlyClients
    abstract_verifier: LLMBackend
    passage_verifier: LLMBackend
    embeddings: EmbeddingProvider
    clock: Any
    parser_backend: LLMBackend | None = None
    search_backend: LLMBackend | None = None
    pdf_extractor: PdfExtractor | None = None


def build_deps(
    cfg: PipelineConfig,
    *,
    mode: str = "live",
    fixture_dir: str | None = None,
    clock=None,
) -> PipelineDeps:
    """Wire transport, clients, and backends for a run.

    Replay runs get a deterministic clock and fixture-backed backends, so a
    replayed batch is hermetic and byte-stable.
    """
    if clock is None:
        clock = FakeClock() if mode == "replay" else SystemClock()
    transport = Transport(mode=mode, fixture_dir=fixture_dir, policy=cfg.rate_policy, clock=clock)
    clients = ScholarlyClients(transport)
    store = FixtureStore(fixture_dir) if fixture_dir else None

    def backend_for(role: str) -> LLMBackend | None:
        spec = cfg.backends[role]
        if spec.kind == "none":
            return None
        if mode == "replay":
            assert store is not None
            return ReplayLLMBackend(role, store)
        live = HttpChatBackend(
            name=role,
            endpoint=spec.endpoint,
            model=spec.model,
            api_key_env=spec.api_key_env,
            options=dict(spec.options),
        )
        if mode == "record":
            assert store is not None
            return RecordingLLMBackend(live, store)
        return live

    abstract_verifier = backend_for("abstract_verifier")
    passage_verifier = backend_for("passage_verifier")
    if abstract_verifier is None or passage_verifier is None:
        raise InvalidInput("abstract_verifier and passage_verifier backends are required")

    if cfg.embeddings.kind == "http" and mode != "replay":
        embeddings: EmbeddingProvider = HttpEmbeddingProvider(cfg.embeddings.endpoint)
    else:
        embeddings = HashedTfEmbedding(cfg.embeddings.dimension)

    return PipelineDeps(
        clients=clients,
        abstract_verifier=abstract_verifier,
        passage_verifier=passage_verifier,
        embeddings=embeddings,
        clock=clock,
        parser_backend=backend_for("parser"),
        search_backend=backend_for("search"),
    )


def _parse_instance_citation(
    instance: ClaimInstance, deps: PipelineDeps, attempts: list[StageAttempt]
) -> ParsedCitation:
    """Pattern pass plus optional LLM parser, pattern fields taking precedence.

    Parser failures degrade to the pattern pass alone; an empty parse is not
    an error here because the retrieval cascades simply find nothing to do.
    """
    timer = deps.clock.monotonic
    parsed = extract_identifiers(instance.citation)
    if deps.parser_backend is not None:
        started = timer()
        try:
            llm = llm_parse_citation(instance.citation, deps.parser_backend)
        except (BackendError, MalformedResponse):
            attempts.append(StageAttempt("parse:llm", "llm_parser", "error", timer() - started))
        else:
            attempts.append(StageAttempt("parse:llm", "llm_parser", "success", timer() - started))
            parsed = ParsedCitation(
                arxiv_id=parsed.arxiv_id or llm.arxiv_id,
                doi=parsed.doi or llm.doi,
                url=parsed.url or llm.url,
                title=parsed.title or llm.title,
            )
    return parsed


def verify_claim(
    instance: ClaimInstance, cfg: PipelineConfig, deps: PipelineDeps
) -> VerificationResult:
    """Run the full staged decision for one claim.

    Hard per-instance failures (passage-stage malformed output, unrecoverable
    transport faults) raise; callers turn them into error records rather than
    fabricated verdicts.
    """
    timer = deps.clock.monotonic
    deps.clients.transport.cache.reset_local_hits()
    attempts: list[StageAttempt] = []
    final_sources: dict[str, str | None] = {"abstract": None, "fulltext": None}

    def finish(
        final: VerdictLabel,
        phase1: StageResult | None,
        phase2: StageResult | None,
        escalated: bool,
        reason: str | None = None,
    ) -> VerificationResult:
        trace = RetrievalTrace(
            stages=tuple(attempts),
            cache_hits=deps.clients.transport.cache.local_hits(),
            final_sources=final_sources,
            final_reason=reason,
        )
        return VerificationResult(
            final=final, phase1=phase1, phase2=phase2, escalated=escalated, trace=trace
        )

    parsed = _parse_instance_citation(instance, deps, attempts)

    # Evidence for Phase 1.
    abstract_text: str | None = None
    if cfg.evidence_mode == "provided-abstract":
        if not (instance.provided_abstract and instance.provided_abstract.strip()):
            raise InvalidInput(
                f"instance {instance.id}: provided-abstract mode requires an abstract"
            )
        abstract_text = instance.provided_abstract
    else:
        try:
            evidence, retrieval_attempts = retrieve_abstract(
                parsed,
                deps.clients,
                cfg.title_gate,
                citation_text=instance.citation,
                search_backend=deps.search_backend,
                search_retries=cfg.rate_policy.llm_search_retries,
                timer=timer,
            )
            attempts.extend(retrieval_attempts)
            abstract_text = evidence.abstract_text
            final_sources["abstract"] = evidence.source
        except AbstractNotFound as exc:
            attempts.extend(exc.attempts)

    # Phase 1 verdict; a missing abstract or malformed reply defers to Phase 2.
    if abstract_text is None:
        phase1 = StageResult(VerdictLabel.NEI, "no_abstract", "")
    else:
        started = timer()
        try:
            phase1 = verify_abstract(instance.claim, abstract_text, deps.abstract_verifier)
        except MalformedResponse:
            attempts.append(
                StageAttempt("verify:abstract", "abstract_verifier", "error", timer() - started)
            )
            phase1 = StageResult(VerdictLabel.NEI, "malformed_response", "")
        else:
            attempts.append(
                StageAttempt("verify:abstract", "abstract_verifier", "success", timer() - started)
            )

    if phase1.verdict is not VerdictLabel.NEI:
        return finish(phase1.verdict, phase1, None, escalated=False)

    # Phase 2: full-text retrieval.
    try:
        document, fulltext_attempts = retrieve_fulltext(
            parsed,
            deps.clients,
            cfg.fulltext_gate,
            search_backend=deps.search_backend,
            search_retries=cfg.rate_policy.llm_search_retries,
            pdf_extractor=deps.pdf_extractor,
            timer=timer,
        )
        attempts.extend(fulltext_attempts)
        final_sources["fulltext"] = document.source
    except FullTextNotFound as exc:
        attempts.extend(exc.attempts)
        return finish(VerdictLabel.NEI, phase1, None, escalated=True, reason="fulltext_not_found")

    # Passage selection.
    started = timer()
    chunks = chunk_document(document.text, cfg.chunking)
    passages = select_passages(instance.claim, chunks, deps.embeddings, cfg.selection)
    attempts.append(
        StageAttempt(
            "passages:select", "embedding", "success" if passages else "miss", timer() - started
        )
    )
    if not passages:
        return finish(VerdictLabel.NEI, phase1, None, escalated=True, reason="no_passages")

    # Phase 2 verdict; malformed output here is a hard error.
    started = timer()
    try:
        phase2 = verify_passages(
            instance.claim, passages, deps.passage_verifier, abstract=abstract_text
        )
    except MalformedResponse:
        attempts.append(
            StageAttempt("verify:passages", "passage_verifier", "error", timer() - started)
        )
        raise
    attempts.append(
        StageAttempt("verify:passages", "passage_verifier", "success", timer() - started)
    )
    return finish(phase2.verdict, phase1, phase2, escalated=True)


@dataclass(frozen=True)
class BatchOutput:
    """Per-instance records in input order plus the run summary."""

    records: tuple[dict[str, Any], ...]
    summary: dict[str, Any]


def verify_batch(
    instances: list[ClaimInstance], cfg: PipelineConfig, deps: PipelineDeps
) -> BatchOutput:
    """Verify many instances, isolating per-instance failures.

    Results come back in input order regardless of execution order; the
    request cache inside deps is shared across the whole run.
    """
    ids = [instance.id for instance in instances]
    if len(set(ids)) != len(ids):
        raise InvalidInput("instance ids must be unique")

    def run(item: tuple[int, ClaimInstance]):
        index, instance = item
        try:
            result = verify_claim(instance, cfg, deps)
            return index, {"id": instance.id, "result": result.to_json_dict()}, result
        except Exception as exc:  # per-instance isolation
            record = {
                "id": instance.id,
                "error": {"type": type(exc).__name__, "message": str(exc)},
            }
            return index, record, None

    records: list[dict[str, Any] | None] = [None] * len(instances)
    results: list[VerificationResult | None] = [None] * len(instances)
    started = deps.clock.monotonic()
    if instances:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for index, record, result in pool.map(run, enumerate(instances)):
                records[index] = record
                results[index] = result
    total_seconds = deps.clock.monotonic() - started

    summary = summarize_run(records, results, total_seconds)
    return BatchOutput(records=tuple(r for r in records if r is not None), summary=summary)


def summarize_run(
    records: list[dict[str, Any] | None],
    results: list[VerificationResult | None],
    total_seconds: float,
) -> dict[str, Any]:
    resolved = sum(1 for r in results if r is not None and not r.escalated)
    escalated = sum(1 for r in results if r is not None and r.escalated)
    errors = sum(1 for rec in records if rec is not None and "error" in rec)

    stage_seconds: dict[str, float] = {}
    for result in results:
        if result is None:
            continue
        for attempt in result.trace.stages:
            group = attempt.stage.split(":", 1)[0]
            stage_seconds[group] = stage_seconds.get(group, 0.0) + attempt.duration_s

    return {
        "total": len(records),
        "resolved_phase1": resolved,
        "escalated": escalated,
        "errors": errors,
        "total_seconds": total_seconds,
        "stage_seconds": {k: stage_seconds[k] for k in sorted(stage_seconds)},
    }
