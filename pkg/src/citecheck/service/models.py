"""Pydantic request/response models for the verification service."""
from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class TransportOptions(BaseModel):
    mode: Literal["live", "record", "replay"] = "live"
    fixture_dir: str | None = None


class InstancePayload(BaseModel):
    """One batch instance; field-level validation happens per instance so a
    bad line never rejects the whole request."""

    id: str
    claim: str = ""
    citation: str = ""
    gold_label: str | None = None
    abstract: str | None = None


class VerifyRequest(BaseModel):
    claim: str
    citation: str
    abstract: str | None = None
    config: dict[str, Any] = Field(default_factory=dict)
    transport: TransportOptions = Field(default_factory=TransportOptions)


class VerifyResponse(BaseModel):
    result: dict[str, Any] | None = None
    error: dict[str, Any] | None = None


class BatchRequest(BaseModel):
    instances: list[InstancePayload]
    mode: Literal["provided-abstract", "retrieve"] | None = None
    workers: int | None = None
    config: dict[str, Any] = Field(default_factory=dict)
    transport: TransportOptions = Field(default_factory=TransportOptions)


class BatchResponse(BaseModel):
    records: list[dict[str, Any]]
    summary: dict[str, Any]


class EvalRequest(BaseModel):
    predictions: list[dict[str, Any]]
    golds: list[dict[str, Any]]
    setting: Literal["2class", "3class"] = "3class"


class EvalResponse(BaseModel):
    metrics: dict[str, Any]
    escalation: dict[str, Any] | None = None


class ReportRequest(BaseModel):
    traces: list[dict[str, Any]]


class ReportResponse(BaseModel):
    report: dict[str, Any]


class HealthResponse(BaseModel):
    status: str
    version: str
