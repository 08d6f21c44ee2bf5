"""Metrics and reports: micro/macro F1, the binary support-vs-rest metric,
row-normalized confusion matrices, escalation accounting, and retrieval
coverage/latency statistics.
"""
from __future__ import annotations

import math
from typing import Any, Iterable, Sequence

from .core import VerdictLabel, VerificationResult
from .errors import EmptyInput, LengthMismatch, MissingGold

THREE_CLASS = (VerdictLabel.SUPPORTS, VerdictLabel.CONTRADICTS, VerdictLabel.NEI)
TWO_CLASS = (VerdictLabel.SUPPORTS, VerdictLabel.CONTRADICTS)

Labels = Sequence[VerdictLabel]


def _check(preds: Labels, golds: Labels) -> None:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise EmptyInput("no label pairs to score")


def per_class(
    preds: Labels, golds: Labels, labels: tuple[VerdictLabel, ...] = THREE_CLASS
) -> dict[VerdictLabel, dict[str, float]]:
    """Precision/recall/F1 per label; empty denominators score 0."""
    _check(preds, golds)
    table: dict[VerdictLabel, dict[str, float]] = {}
    for label in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p is label and g is label)
        fp = sum(1 for p, g in zip(preds, golds) if p is label and g is not label)
        fn = sum(1 for p, g in zip(preds, golds) if g is label and p is not label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        table[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": float(tp + fn),
        }
    return table


def micro_f1(
    preds: Labels, golds: Labels, labels: tuple[VerdictLabel, ...] = THREE_CLASS
) -> float:
    """F1 from pooled true/false positives; equals accuracy for single-label tasks."""
    _check(preds, golds)
    tp = fp = fn = 0
    for label in labels:
        tp += sum(1 for p, g in zip(preds, golds) if p is label and g is label)
        fp += sum(1 for p, g in zip(preds, golds) if p is label and g is not label)
        fn += sum(1 for p, g in zip(preds, golds) if g is label and p is not label)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def macro_f1(
    preds: Labels, golds: Labels, labels: tuple[VerdictLabel, ...] = THREE_CLASS
) -> float:
    """Unweighted mean of per-class F1 over the label domain."""
    table = per_class(preds, golds, labels)
    return sum(row["f1"] for row in table.values()) / len(labels)


def sup_not_sup(preds: Labels, golds: Labels) -> float:
    """Binary support-vs-rest micro-F1 after collapsing the three labels."""
    _check(preds, golds)

    def collapse(label: VerdictLabel) -> bool:
        return label is VerdictLabel.SUPPORTS

    matches = sum(1 for p, g in zip(preds, golds) if collapse(p) == collapse(g))
    return matches / len(preds)


def confusion_matrix(
    preds: Labels,
    golds: Labels,
    labels: tuple[VerdictLabel, ...] = THREE_CLASS,
) -> dict[str, Any]:
    """Counts indexed [gold][pred] plus row-normalized fractions.

    Rows are gold labels; zero rows stay zero under normalization.
    """
    _check(preds, golds)
    index = {label: i for i, label in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for p, g in zip(preds, golds):
        counts[index[g]][index[p]] += 1
    normalized = []
    for row in counts:
        total = sum(row)
        normalized.append([c / total if total else 0.0 for c in row])
    return {
        "labels": [label.serialize() for label in labels],
        "counts": counts,
        "row_normalized": normalized,
    }


def metrics_report(
    preds: Labels, golds: Labels, labels: tuple[VerdictLabel, ...] = THREE_CLASS
) -> dict[str, Any]:
    """The full metric bundle for one prediction set."""
    table = per_class(preds, golds, labels)
    report: dict[str, Any] = {
        "n": len(preds),
        "micro_f1": micro_f1(preds, golds, labels),
        "macro_f1": macro_f1(preds, golds, labels),
        "per_class": {
            label.serialize(): {key: row[key] for key in ("precision", "recall", "f1", "support")}
            for label, row in table.items()
        },
        "confusion": confusion_matrix(preds, golds, labels),
    }
    if set(labels) == set(THREE_CLASS):
        report["sup_not_sup"] = sup_not_sup(preds, golds)
    return report


def escalation_report(
    results_with_gold: Iterable[tuple[VerificationResult, VerdictLabel | None]],
) -> dict[str, Any]:
    """Bucket outcomes by how the staged decision played out.

    Escalated instances split four ways: corrected (committed to the right
    non-NEI verdict), remained NEI correctly, remained NEI incorrectly, and
    flipped to a wrong non-NEI verdict.
    """
    resolved_correct = resolved_incorrect = 0
    corrected = remained_nei_correct = remained_nei_incorrect = flipped_wrong = 0
    total = 0
    for result, gold in results_with_gold:
        if gold is None:
            raise MissingGold("escalation report requires gold labels on every result")
        total += 1
        if not result.escalated:
            if result.final is gold:
                resolved_correct += 1
            else:
                resolved_incorrect += 1
            continue
        if result.final is VerdictLabel.NEI:
            if gold is VerdictLabel.NEI:
                remained_nei_correct += 1
            else:
                remained_nei_incorrect += 1
        elif result.final is gold:
            corrected += 1
        else:
            flipped_wrong += 1
    resolved = resolved_correct + resolved_incorrect
    escalated = total - resolved
    return {
        "total": total,
        "resolved_phase1": {
            "total": resolved,
            "correct": resolved_correct,
            "incorrect": resolved_incorrect,
        },
        "escalated": {
            "total": escalated,
            "corrected": corrected,
            "remained_nei_correct": remained_nei_correct,
            "remained_nei_incorrect": remained_nei_incorrect,
            "flipped_wrong": flipped_wrong,
        },
    }


def _nearest_rank_p95(values: list[float]) -> float:
    ranked = sorted(values)
    rank = math.ceil(0.95 * len(ranked))
    return ranked[max(rank - 1, 0)]


def _latency_stats(values: list[float]) -> dict[str, float]:
    if not values:
        return {"count": 0, "median": 0.0, "mean": 0.0, "p95": 0.0, "max": 0.0, "total": 0.0}
    ranked = sorted(values)
    mid = len(ranked) // 2
    median = ranked[mid] if len(ranked) % 2 else (ranked[mid - 1] + ranked[mid]) / 2
    return {
        "count": len(values),
        "median": median,
        "mean": sum(values) / len(values),
        "p95": _nearest_rank_p95(values),
        "max": max(values),
        "total": sum(values),
    }


def coverage_latency_report(traces: Iterable[dict[str, Any]]) -> dict[str, Any]:
    """Coverage categories, per-source shares, and latency stats from traces.

    A trace is the dict form of RetrievalTrace; latency per paper is the sum
    of its attempt durations within each cascade. Empty input yields a zeroed
    report.
    """
    papers = 0
    abstract_ok = fulltext_ok = 0
    abstract_only = no_retrieval = 0
    abstract_sources: dict[str, int] = {}
    fulltext_sources: dict[str, int] = {}
    abstract_latency: list[float] = []
    fulltext_latency: list[float] = []

    for trace in traces:
        papers += 1
        stages = trace.get("stages", [])
        abstract_seconds = 0.0
        fulltext_seconds = 0.0
        abstract_source = None
        fulltext_source = None
        attempted_abstract = attempted_fulltext = False
        for stage in stages:
            name = stage.get("stage", "")
            duration = float(stage.get("duration_s", 0.0))
            if name.startswith("abstract:"):
                attempted_abstract = True
                abstract_seconds += duration
                if stage.get("outcome") == "success" and abstract_source is None:
                    abstract_source = stage.get("source")
            elif name.startswith("fulltext:"):
                attempted_fulltext = True
                fulltext_seconds += duration
                if stage.get("outcome") == "success" and fulltext_source is None:
                    fulltext_source = stage.get("source")
        if attempted_abstract:
            abstract_latency.append(abstract_seconds)
        if attempted_fulltext:
            fulltext_latency.append(fulltext_seconds)
        if abstract_source:
            abstract_ok += 1
            abstract_sources[abstract_source] = abstract_sources.get(abstract_source, 0) + 1
        if fulltext_source:
            fulltext_ok += 1
            fulltext_sources[fulltext_source] = fulltext_sources.get(fulltext_source, 0) + 1
        if abstract_source and not fulltext_source:
            abstract_only += 1
        if not abstract_source and not fulltext_source:
            no_retrieval += 1

    def pct(count: int) -> float:
        return count / papers if papers else 0.0

    def shares(counter: dict[str, int], successes: int) -> dict[str, dict[str, float]]:
        return {
            source: {"count": counter[source], "share": counter[source] / successes}
            for source in sorted(counter)
        }

    return {
        "papers": papers,
        "coverage": {
            "abstract_retrieved": {"count": abstract_ok, "pct": pct(abstract_ok)},
            "fulltext_retrieved": {"count": fulltext_ok, "pct": pct(fulltext_ok)},
            "abstract_only": {"count": abstract_only, "pct": pct(abstract_only)},
            "no_retrieval": {"count": no_retrieval, "pct": pct(no_retrieval)},
        },
        "sources": {
            "abstract": shares(abstract_sources, abstract_ok) if abstract_ok else {},
            "fulltext": shares(fulltext_sources, fulltext_ok) if fulltext_ok else {},
        },
        "latency": {
            "abstract_retrieval": _latency_stats(abstract_latency),
            "fulltext_retrieval": _latency_stats(fulltext_latency),
        },
    }


# -- plain-text tables ---------------------------------------------------------


def render_metrics_table(report: dict[str, Any]) -> str:
    lines = [f"n = {report['n']}"]
    lines.append(f"Micro-F1   {report['micro_f1']:.4f}")
    lines.append(f"Macro-F1   {report['macro_f1']:.4f}")
    if "sup_not_sup" in report:
        lines.append(f"Sup./Not Sup.  {report['sup_not_sup']:.4f}")
    lines.append("")
    lines.append(f"{'class':<16}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>10}")
    for label, row in report["per_class"].items():
        lines.append(
            f"{label:<16}{row['precision']:>10.4f}{row['recall']:>10.4f}"
            f"{row['f1']:>10.4f}{row['support']:>10.0f}"
        )
    confusion = report["confusion"]
    lines.append("")
    lines.append("confusion (rows = gold, row-normalized)")
    header = " " * 16 + "".join(f"{label:>16}" for label in confusion["labels"])
    lines.append(header)
    for label, row in zip(confusion["labels"], confusion["row_normalized"]):
        lines.append(f"{label:<16}" + "".join(f"{value:>16.3f}" for value in row))
    return "\n".join(lines)


def render_escalation_table(report: dict[str, Any]) -> str:
    total = report["total"] or 1
    resolved = report["resolved_phase1"]
    escalated = report["escalated"]

    def row(label: str, count: int) -> str:
        return f"{label:<36}{count:>6} ({100.0 * count / total:.1f}%)"

    lines = [
        row("Total instances", report["total"]),
        row("Resolved at Phase 1 (early exit)", resolved["total"]),
        row("  Correct", resolved["correct"]),
        row("  Incorrect", resolved["incorrect"]),
        row("Escalated to Phase 2", escalated["total"]),
        row("  Corrected by Phase 2", escalated["corrected"]),
        row("  Remained NEI (correctly)", escalated["remained_nei_correct"]),
        row("  Remained NEI (incorrectly)", escalated["remained_nei_incorrect"]),
        row("  Flipped to wrong verdict", escalated["flipped_wrong"]),
    ]
    return "\n".join(lines)


def render_coverage_table(report: dict[str, Any]) -> str:
    coverage = report["coverage"]
    lines = [f"Papers: {report['papers']}"]
    labels = {
        "abstract_retrieved": "Abstract retrieved",
        "fulltext_retrieved": "Full text retrieved",
        "abstract_only": "Abstract only",
        "no_retrieval": "No retrieval",
    }
    for key, label in labels.items():
        entry = coverage[key]
        lines.append(f"{label:<24}{entry['count']:>6}  {100.0 * entry['pct']:.1f}%")
    lines.append("")
    lines.append(f"{'Stage':<22}{'Median':>9}{'Mean':>9}{'P95':>9}{'Max':>9}")
    for key, label in (
        ("abstract_retrieval", "Abstract retrieval"),
        ("fulltext_retrieval", "Full-text retrieval"),
    ):
        stats = report["latency"][key]
        lines.append(
            f"{label:<22}{stats['median']:>8.2f}s{stats['mean']:>8.2f}s"
            f"{stats['p95']:>8.2f}s{stats['max']:>8.2f}s"
        )
    return "\n".join(lines)
