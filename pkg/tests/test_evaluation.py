import random

import pytest

from citecheck.core import RetrievalTrace, StageResult, VerdictLabel, VerificationResult
from citecheck.errors import EmptyInput, LengthMismatch, MissingGold
from citecheck.evaluation import (
    THREE_CLASS,
    confusion_matrix,
    coverage_latency_report,
    escalation_report,
    macro_f1,
    metrics_report,
    micro_f1,
    per_class,
    render_coverage_table,
    render_escalation_table,
    render_metrics_table,
    sup_not_sup,
)

S, C, N = VerdictLabel.SUPPORTS, VerdictLabel.CONTRADICTS, VerdictLabel.NEI


def test_perfect_predictions_score_one():
    labels = [S, C, N, S]
    assert micro_f1(labels, labels) == 1.0
    assert macro_f1(labels, labels) == 1.0
    assert sup_not_sup(labels, labels) == 1.0


def test_hand_computed_fixture():
    golds = [S, S, C, N]
    preds = [S, C, C, N]
    assert micro_f1(preds, golds) == pytest.approx(0.75)
    assert macro_f1(preds, golds) == pytest.approx(7 / 9)
    table = per_class(preds, golds)
    assert table[S]["precision"] == 1.0 and table[S]["recall"] == 0.5
    assert table[C]["precision"] == 0.5 and table[C]["recall"] == 1.0
    assert table[N]["f1"] == 1.0


def test_single_class_predictions():
    golds = [S, C, N]
    preds = [S, S, S]
    table = per_class(preds, golds)
    assert table[S]["recall"] == 1.0
    assert table[C]["recall"] == 0.0 and table[N]["recall"] == 0.0


def test_empty_and_mismatched_inputs():
    with pytest.raises(EmptyInput):
        micro_f1([], [])
    with pytest.raises(LengthMismatch):
        micro_f1([S], [S, C])


def test_sup_not_sup_collapse_counts_c_n_confusion_as_match():
    assert sup_not_sup([N], [C]) == 1.0


def test_sup_not_sup_hand_fixture():
    golds = [S, C, N, S]
    preds = [S, N, C, C]
    assert sup_not_sup(preds, golds) == pytest.approx(0.75)


def test_sup_not_sup_invariant_under_c_n_swap():
    rng = random.Random(13)
    labels = list(THREE_CLASS)
    swap = {S: S, C: N, N: C}
    for _ in range(50):
        n = rng.randint(1, 30)
        golds = [rng.choice(labels) for _ in range(n)]
        preds = [rng.choice(labels) for _ in range(n)]
        swapped = sup_not_sup([swap[p] for p in preds], [swap[g] for g in golds])
        assert sup_not_sup(preds, golds) == swapped


def test_confusion_matrix_identity_on_perfect_predictions():
    labels = [S, C, N, S, N]
    table = confusion_matrix(labels, labels)
    for i in range(3):
        assert table["row_normalized"][i][i] in (1.0, 0.0)
    assert sum(sum(row) for row in table["counts"]) == len(labels)


def test_confusion_matrix_all_s_gold_predicted_n():
    table = confusion_matrix([N, N], [S, S])
    assert table["row_normalized"][0] == [0.0, 0.0, 1.0]
    assert table["row_normalized"][1] == [0.0, 0.0, 0.0]


def test_confusion_rows_sum_to_one_when_populated():
    rng = random.Random(2)
    labels = list(THREE_CLASS)
    golds = [rng.choice(labels) for _ in range(40)]
    preds = [rng.choice(labels) for _ in range(40)]
    table = confusion_matrix(preds, golds)
    for gold_index, row in enumerate(table["row_normalized"]):
        row_count = sum(table["counts"][gold_index])
        if row_count:
            assert sum(row) == pytest.approx(1.0, abs=1e-9)


def test_micro_f1_equals_accuracy():
    rng = random.Random(4)
    labels = list(THREE_CLASS)
    for _ in range(30):
        n = rng.randint(1, 40)
        golds = [rng.choice(labels) for _ in range(n)]
        preds = [rng.choice(labels) for _ in range(n)]
        accuracy = sum(p is g for p, g in zip(preds, golds)) / n
        assert micro_f1(preds, golds) == pytest.approx(accuracy)


# -- escalation accounting ---------------------------------------------------------


def _result(final, phase1, phase2=None, reason=None):
    escalated = phase1 is N
    return VerificationResult(
        final=final,
        phase1=StageResult(phase1, "", ""),
        phase2=StageResult(phase2, "", "") if phase2 is not None else None,
        escalated=escalated,
        trace=RetrievalTrace(final_reason=reason),
    )


def _escalation_fixture():
    pairs = []
    # Six early exits, five of them correct.
    for _ in range(3):
        pairs.append((_result(S, S), S))
    pairs.append((_result(C, C), C))
    pairs.append((_result(C, C), C))
    pairs.append((_result(S, S), C))  # early exit, wrong
    # Four escalations: two corrected, one remained-NEI-correct, one flipped wrong.
    pairs.append((_result(C, N, C), C))
    pairs.append((_result(S, N, S), S))
    pairs.append((_result(N, N, N), N))
    pairs.append((_result(C, N, C), S))
    return pairs


def test_escalation_fixture_buckets():
    report = escalation_report(_escalation_fixture())
    assert report["total"] == 10
    assert report["resolved_phase1"] == {"total": 6, "correct": 5, "incorrect": 1}
    assert report["escalated"] == {
        "total": 4,
        "corrected": 2,
        "remained_nei_correct": 1,
        "remained_nei_incorrect": 0,
        "flipped_wrong": 1,
    }


def test_escalation_identity_on_random_sets():
    rng = random.Random(9)
    labels = list(THREE_CLASS)
    for _ in range(100):
        pairs = []
        for _ in range(rng.randint(1, 25)):
            phase1 = rng.choice(labels)
            if phase1 is N:
                phase2 = rng.choice(labels)
                final = phase2
                pairs.append((_result(final, phase1, phase2), rng.choice(labels)))
            else:
                pairs.append((_result(phase1, phase1), rng.choice(labels)))
        report = escalation_report(pairs)
        assert report["resolved_phase1"]["total"] + report["escalated"]["total"] == report["total"]
        escalated = report["escalated"]
        assert (
            escalated["corrected"]
            + escalated["remained_nei_correct"]
            + escalated["remained_nei_incorrect"]
            + escalated["flipped_wrong"]
            == escalated["total"]
        )


def test_escalation_requires_gold():
    with pytest.raises(MissingGold):
        escalation_report([(_result(S, S), None)])


# -- coverage / latency --------------------------------------------------------------


def _trace(abstract, fulltext, abstract_seconds=1.0, fulltext_seconds=2.0,
           abstract_source="pubmed_title", fulltext_source="pmc_xml"):
    stages = []
    if abstract is not None:
        stages.append(
            {
                "stage": f"abstract:{abstract_source}",
                "source": abstract_source,
                "outcome": "success" if abstract else "miss",
                "duration_s": abstract_seconds,
            }
        )
    if fulltext is not None:
        stages.append(
            {
                "stage": f"fulltext:{fulltext_source}",
                "source": fulltext_source,
                "outcome": "success" if fulltext else "miss",
                "duration_s": fulltext_seconds,
            }
        )
    return {"stages": stages, "cache_hits": 0, "final_sources": {}, "final_reason": None}


def test_coverage_hand_counted_fixture():
    traces = [_trace(True, True) for _ in range(8)]
    traces.append(_trace(True, False))
    traces.append(_trace(False, False))
    report = coverage_latency_report(traces)
    coverage = report["coverage"]
    assert coverage["abstract_retrieved"]["count"] == 9
    assert coverage["abstract_retrieved"]["pct"] == pytest.approx(0.9)
    assert coverage["fulltext_retrieved"]["pct"] == pytest.approx(0.8)
    assert coverage["abstract_only"]["count"] == 1
    assert coverage["no_retrieval"]["count"] == 1


def test_latency_stats_simple_sequence():
    traces = [_trace(True, None, abstract_seconds=s) for s in (1.0, 2.0, 3.0, 4.0, 5.0)]
    stats = coverage_latency_report(traces)["latency"]["abstract_retrieval"]
    assert stats["median"] == 3.0
    assert stats["mean"] == 3.0
    assert stats["max"] == 5.0


def test_p95_is_nearest_rank():
    traces = [_trace(True, None, abstract_seconds=float(s)) for s in range(1, 21)]
    stats = coverage_latency_report(traces)["latency"]["abstract_retrieval"]
    assert stats["p95"] == 19.0


def test_source_shares_within_successes():
    traces = [
        _trace(True, True, abstract_source="pubmed_title"),
        _trace(True, True, abstract_source="openalex_title"),
        _trace(True, True, abstract_source="pubmed_title", fulltext_source="llm_search"),
    ]
    report = coverage_latency_report(traces)
    assert report["sources"]["abstract"]["pubmed_title"]["count"] == 2
    assert report["sources"]["abstract"]["pubmed_title"]["share"] == pytest.approx(2 / 3)
    assert report["sources"]["fulltext"]["llm_search"]["share"] == pytest.approx(1 / 3)


def test_empty_traces_yield_zeroed_report():
    report = coverage_latency_report([])
    assert report["papers"] == 0
    assert report["coverage"]["abstract_retrieved"]["count"] == 0
    assert report["latency"]["abstract_retrieval"]["median"] == 0.0


def test_text_tables_render():
    golds = [S, S, C, N]
    preds = [S, C, C, N]
    metrics_text = render_metrics_table(metrics_report(preds, golds))
    assert "Micro-F1" in metrics_text and "0.7500" in metrics_text
    escalation_text = render_escalation_table(escalation_report(_escalation_fixture()))
    assert "Escalated to Phase 2" in escalation_text
    coverage_text = render_coverage_table(coverage_latency_report([_trace(True, True)]))
    assert "Abstract retrieved" in coverage_text


def test_reference_shape_escalation_91_instances():
    # Shape check: a 91-instance set with 61 early exits (57 correct) and 30
    # escalations (13 corrected, 9 remained-NEI correct, 1 remained-NEI
    # incorrect, 7 flipped) reports exactly those buckets.
    pairs = []
    pairs += [(_result(S, S), S)] * 57            # resolved, correct
    pairs += [(_result(S, S), C)] * 4             # resolved, incorrect
    pairs += [(_result(C, N, C), C)] * 13         # corrected by phase 2
    pairs += [(_result(N, N, N), N)] * 9          # remained NEI, correctly
    pairs += [(_result(N, N, N), S)] * 1          # remained NEI, incorrectly
    pairs += [(_result(C, N, C), S)] * 7          # flipped to a wrong verdict
    report = escalation_report(pairs)
    assert report["total"] == 91
    assert report["resolved_phase1"] == {"total": 61, "correct": 57, "incorrect": 4}
    assert report["escalated"] == {
        "total": 30,
        "corrected": 13,
        "remained_nei_correct": 9,
        "remained_nei_incorrect": 1,
        "flipped_wrong": 7,
    }


def test_reference_shape_coverage_412_papers():
    # Shape check: 391/412 abstracts and 333/412 full texts render as 94.9%
    # and 80.8%, with 74 abstract-only and 5 empty papers.
    traces = []
    traces += [_trace(True, True)] * 317          # both retrieved
    traces += [_trace(True, False)] * 74          # abstract only
    traces += [_trace(False, True)] * 16          # full text only
    traces += [_trace(False, False)] * 5          # nothing retrieved
    report = coverage_latency_report(traces)
    assert report["papers"] == 412
    coverage = report["coverage"]
    assert coverage["abstract_retrieved"]["count"] == 391
    assert coverage["fulltext_retrieved"]["count"] == 333
    assert coverage["abstract_only"]["count"] == 74
    assert coverage["no_retrieval"]["count"] == 5
    assert round(100 * coverage["abstract_retrieved"]["pct"], 1) == 94.9
    assert round(100 * coverage["fulltext_retrieved"]["pct"], 1) == 80.8
    assert round(100 * coverage["abstract_only"]["pct"], 1) == 18.0
    assert round(100 * coverage["no_retrieval"]["pct"], 1) == 1.2
