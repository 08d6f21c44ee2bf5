import json

import pytest

from citecheck.core import (
    PassageSet,
    Passage,
    RetrievalTrace,
    StageResult,
    VerdictLabel,
    VerificationResult,
    canonical_json,
    parse_label,
    result_from_json_dict,
)
from citecheck.errors import UnknownLabel


def test_parse_label_capitalized_tokens():
    assert parse_label("SUPPORTS") is VerdictLabel.SUPPORTS
    assert parse_label("CONTRADICTS") is VerdictLabel.CONTRADICTS
    assert parse_label("NOT_ENOUGH_INFO") is VerdictLabel.NEI


def test_parse_label_nei_alias():
    assert parse_label("NEI") is VerdictLabel.NEI
    assert parse_label("nei") is VerdictLabel.NEI


def test_parse_label_trims_and_uppercases():
    assert parse_label(" supports \n") is VerdictLabel.SUPPORTS


def test_parse_label_rejects_unknown():
    with pytest.raises(UnknownLabel):
        parse_label("MAYBE")


@pytest.mark.parametrize("label", list(VerdictLabel))
def test_label_round_trip(label):
    assert parse_label(label.serialize()) is label


def test_verification_result_requires_consistent_escalation():
    phase1 = StageResult(VerdictLabel.SUPPORTS, "r", "raw")
    with pytest.raises(ValueError):
        VerificationResult(
            final=VerdictLabel.SUPPORTS,
            phase1=phase1,
            phase2=None,
            escalated=True,
            trace=RetrievalTrace(),
        )


def test_verification_result_without_escalation_forbids_phase2():
    phase1 = StageResult(VerdictLabel.SUPPORTS, "r", "raw")
    phase2 = StageResult(VerdictLabel.CONTRADICTS, "r2", "raw2")
    with pytest.raises(ValueError):
        VerificationResult(
            final=VerdictLabel.SUPPORTS,
            phase1=phase1,
            phase2=phase2,
            escalated=False,
            trace=RetrievalTrace(),
        )


def test_result_json_has_exact_field_names():
    phase1 = StageResult(VerdictLabel.NEI, "unclear", "{}")
    phase2 = StageResult(VerdictLabel.CONTRADICTS, "refuted", "{}")
    result = VerificationResult(
        final=VerdictLabel.CONTRADICTS,
        phase1=phase1,
        phase2=phase2,
        escalated=True,
        trace=RetrievalTrace(),
    )
    doc = json.loads(canonical_json(result.to_json_dict()))
    assert sorted(doc) == ["escalated", "final", "phase1", "phase2", "trace"]
    assert doc["final"] == "CONTRADICTS"
    assert doc["phase1"]["verdict"] == "NOT_ENOUGH_INFO"


def test_result_json_round_trip():
    result = VerificationResult(
        final=VerdictLabel.NEI,
        phase1=StageResult(VerdictLabel.NEI, "r", "raw"),
        phase2=None,
        escalated=True,
        trace=RetrievalTrace(final_reason="fulltext_not_found"),
    )
    rebuilt = result_from_json_dict(result.to_json_dict())
    assert rebuilt == result


def test_passage_set_requires_non_increasing_similarity():
    with pytest.raises(ValueError):
        PassageSet(
            passages=(
                Passage("a", (0, 1), 0.4),
                Passage("b", (1, 2), 0.9),
            )
        )


def test_canonical_json_is_stable():
    payload = {"b": 1, "a": {"d": 2, "c": [3, 4]}}
    assert canonical_json(payload) == canonical_json(json.loads(canonical_json(payload)))
