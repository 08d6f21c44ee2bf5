"""FastAPI service wrapping the verification pipeline.

The CLI is a thin client of these endpoints; other clients can POST the same
payloads. Per-instance failures come back as error records inside a 200
response, while request-level problems (bad config, misaligned ids) are 400s.
"""
from __future__ import annotations

import logging
from typing import Any

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..core import ClaimInstance, VerdictLabel, parse_label, result_from_json_dict
from ..errors import CitecheckError, InvalidInput, UnknownLabel
from ..evaluation import (
    THREE_CLASS,
    TWO_CLASS,
    coverage_latency_report,
    escalation_report,
    metrics_report,
)
from ..pipeline import PipelineConfig, build_deps, verify_batch, verify_claim
from .models import (
    BatchRequest,
    BatchResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    InstancePayload,
    ReportRequest,
    ReportResponse,
    TransportOptions,
    VerifyRequest,
    VerifyResponse,
)

logger = logging.getLogger(__name__)


def _config_from(doc: dict[str, Any], **overrides: Any) -> PipelineConfig:
    merged = dict(doc)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    try:
        return PipelineConfig.from_flat(merged)
    except (InvalidInput, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _deps_from(cfg: PipelineConfig, transport: TransportOptions):
    try:
        return build_deps(cfg, mode=transport.mode, fixture_dir=transport.fixture_dir)
    except (InvalidInput, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _build_instance(payload: InstancePayload) -> ClaimInstance:
    gold = parse_label(payload.gold_label) if payload.gold_label else None
    return ClaimInstance(
        id=payload.id,
        claim=payload.claim,
        citation=payload.citation,
        gold_label=gold,
        provided_abstract=payload.abstract,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="citecheck", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(request: VerifyRequest) -> VerifyResponse:
        mode = "provided-abstract" if request.abstract else "retrieve"
        cfg = _config_from(request.config, evidence_mode=mode)
        deps = _deps_from(cfg, request.transport)
        try:
            instance = ClaimInstance(
                id="single",
                claim=request.claim,
                citation=request.citation,
                provided_abstract=request.abstract,
            )
            result = verify_claim(instance, cfg, deps)
        except (CitecheckError, ValueError) as exc:
            return VerifyResponse(error={"type": type(exc).__name__, "message": str(exc)})
        return VerifyResponse(result=result.to_json_dict())

    @app.post("/batch", response_model=BatchResponse)
    def batch(request: BatchRequest) -> BatchResponse:
        cfg = _config_from(request.config, evidence_mode=request.mode, workers=request.workers)
        deps = _deps_from(cfg, request.transport)

        ids = [payload.id for payload in request.instances]
        if len(set(ids)) != len(ids):
            raise HTTPException(status_code=400, detail="instance ids must be unique")

        instances: list[ClaimInstance] = []
        slots: list[dict[str, Any] | None] = [None] * len(request.instances)
        for index, payload in enumerate(request.instances):
            try:
                instances.append(_build_instance(payload))
            except (ValueError, UnknownLabel) as exc:
                slots[index] = {
                    "id": payload.id,
                    "error": {"type": type(exc).__name__, "message": str(exc)},
                }

        try:
            output = verify_batch(instances, cfg, deps)
        except InvalidInput as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        produced = iter(output.records)
        records = [slot if slot is not None else next(produced) for slot in slots]
        broken = sum(1 for slot in slots if slot is not None)
        summary = dict(output.summary)
        summary["total"] = len(records)
        summary["errors"] = summary.get("errors", 0) + broken
        return BatchResponse(records=records, summary=summary)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(request: EvalRequest) -> EvalResponse:
        labels = TWO_CLASS if request.setting == "2class" else THREE_CLASS
        golds_by_id = {}
        for doc in request.golds:
            if "id" not in doc:
                raise HTTPException(status_code=400, detail="gold records need an id")
            raw = doc.get("label", doc.get("gold_label"))
            if raw is None:
                raise HTTPException(status_code=400, detail=f"gold {doc['id']} has no label")
            try:
                golds_by_id[doc["id"]] = parse_label(raw)
            except UnknownLabel as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc

        preds: list[VerdictLabel] = []
        golds: list[VerdictLabel] = []
        results_with_gold = []
        all_have_stages = bool(request.predictions)
        for doc in request.predictions:
            pred_id = doc.get("id")
            if pred_id is None or pred_id not in golds_by_id:
                raise HTTPException(
                    status_code=400, detail=f"prediction id {pred_id!r} has no matching gold"
                )
            result_doc = doc.get("result")
            raw = doc.get("label", doc.get("final"))
            if raw is None and isinstance(result_doc, dict):
                raw = result_doc.get("final")
            if raw is None:
                raise HTTPException(status_code=400, detail=f"prediction {pred_id} has no label")
            try:
                label = parse_label(raw)
            except UnknownLabel as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            preds.append(label)
            golds.append(golds_by_id[pred_id])
            if isinstance(result_doc, dict) and "escalated" in result_doc:
                results_with_gold.append(
                    (result_from_json_dict(result_doc), golds_by_id[pred_id])
                )
            else:
                all_have_stages = False

        if request.setting == "2class":
            bad = [label for label in golds + preds if label is VerdictLabel.NEI]
            if bad:
                raise HTTPException(
                    status_code=400, detail="NOT_ENOUGH_INFO labels are not allowed in the 2class setting"
                )

        try:
            metrics = metrics_report(preds, golds, labels)
        except CitecheckError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        escalation = escalation_report(results_with_gold) if all_have_stages else None
        return EvalResponse(metrics=metrics, escalation=escalation)

    @app.post("/report", response_model=ReportResponse)
    def report(request: ReportRequest) -> ReportResponse:
        return ReportResponse(report=coverage_latency_report(request.traces))

    return app


app = create_app()
