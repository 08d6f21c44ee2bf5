import json

import pytest

from citecheck.clocks import FakeClock
from citecheck.core import ClaimInstance, VerdictLabel
from citecheck.errors import InvalidInput, MalformedResponse
from citecheck.fixtures import FixtureStore, encode_body
from citecheck.llm import ScriptedLLMBackend
from citecheck.passages import HashedTfEmbedding
from citecheck.pipeline import (
    PipelineConfig,
    PipelineDeps,
    build_deps,
    verify_batch,
    verify_claim,
)
from citecheck.sources import ScholarlyClients
from citecheck.transport import Transport


def _verdict(token, reasoning="r"):
    return json.dumps({"verdict": token, "reasoning": reasoning})


def _deps(tmp_path, abstract_responses, passage_responses=(), seeds=(), search=None):
    store = FixtureStore(tmp_path)
    for source, url, status, content_type, body in seeds:
        store.put(
            "http",
            {"source": source, "method": "GET", "url": url, "params": {}},
            {"status": status, "content_type": content_type, **encode_body(body.encode())},
        )
    transport = Transport(mode="replay", fixture_dir=str(tmp_path), clock=FakeClock())
    return PipelineDeps(
        clients=ScholarlyClients(transport),
        abstract_verifier=ScriptedLLMBackend("abstract_verifier", list(abstract_responses)),
        passage_verifier=ScriptedLLMBackend("passage_verifier", list(passage_responses)),
        embeddings=HashedTfEmbedding(),
        clock=FakeClock(),
        search_backend=search,
    )


def _instance(instance_id="x", claim="The drug reduces mortality", citation="Doe. Paper. arXiv:2401.00009.",
              abstract="An abstract about the drug trial."):
    return ClaimInstance(id=instance_id, claim=claim, citation=citation, provided_abstract=abstract)


FULLTEXT_HTML = (
    "<html><body>"
    + "".join("<p>The drug reduces mortality in all cohorts.</p>" for _ in range(80))
    + "</body></html>"
)


def test_early_exit_supports(tmp_path):
    deps = _deps(tmp_path, [_verdict("SUPPORTS")])
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.final is VerdictLabel.SUPPORTS
    assert result.escalated is False
    assert result.phase2 is None
    stage_names = [a.stage for a in result.trace.stages]
    assert not any(s.startswith(("fulltext:", "passages:", "verify:passages")) for s in stage_names)


def test_escalation_to_contradicts(tmp_path):
    seeds = [("arxiv_web", "https://arxiv.org/html/2401.00009", 200, "text/html", FULLTEXT_HTML)]
    deps = _deps(tmp_path, [_verdict("NEI")], [_verdict("CONTRADICTS")], seeds)
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.final is VerdictLabel.CONTRADICTS
    assert result.escalated is True
    assert result.phase1.verdict is VerdictLabel.NEI
    assert result.phase2.verdict is VerdictLabel.CONTRADICTS
    assert result.trace.final_sources["fulltext"] == "arxiv_html"


def test_escalation_with_missing_fulltext_returns_nei(tmp_path):
    seeds = [
        ("arxiv_web", "https://arxiv.org/html/2401.00009", 404, "text/html", "x"),
        ("arxiv_web", "https://arxiv.org/pdf/2401.00009", 404, "text/html", "x"),
    ]
    deps = _deps(tmp_path, [_verdict("NEI")], [], seeds)
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.final is VerdictLabel.NEI
    assert result.escalated is True
    assert result.phase2 is None
    assert result.trace.final_reason == "fulltext_not_found"


def test_escalation_with_no_passages_returns_nei(tmp_path):
    off_topic = "<html><body>" + "".join(
        "<p>Entirely unrelated gardening advice paragraph.</p>" for _ in range(80)
    ) + "</body></html>"
    seeds = [("arxiv_web", "https://arxiv.org/html/2401.00009", 200, "text/html", off_topic)]
    deps = _deps(tmp_path, [_verdict("NEI")], [], seeds)
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.final is VerdictLabel.NEI
    assert result.trace.final_reason == "no_passages"
    assert result.phase2 is None


def test_phase2_nei_stays_nei(tmp_path):
    seeds = [("arxiv_web", "https://arxiv.org/html/2401.00009", 200, "text/html", FULLTEXT_HTML)]
    deps = _deps(tmp_path, [_verdict("NEI")], [_verdict("NOT_ENOUGH_INFO")], seeds)
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.final is VerdictLabel.NEI
    assert result.escalated is True
    assert result.phase2.verdict is VerdictLabel.NEI


def test_malformed_abstract_response_escalates(tmp_path):
    seeds = [
        ("arxiv_web", "https://arxiv.org/html/2401.00009", 404, "text/html", "x"),
        ("arxiv_web", "https://arxiv.org/pdf/2401.00009", 404, "text/html", "x"),
    ]
    deps = _deps(tmp_path, ["not json at all"], [], seeds)
    result = verify_claim(_instance(), PipelineConfig(), deps)
    assert result.escalated is True
    assert result.phase1.verdict is VerdictLabel.NEI
    assert result.phase1.reasoning == "malformed_response"


def test_malformed_passage_response_is_hard_error(tmp_path):
    seeds = [("arxiv_web", "https://arxiv.org/html/2401.00009", 200, "text/html", FULLTEXT_HTML)]
    deps = _deps(tmp_path, [_verdict("NEI")], ["garbled output"], seeds)
    with pytest.raises(MalformedResponse):
        verify_claim(_instance(), PipelineConfig(), deps)


def test_provided_abstract_mode_requires_abstract(tmp_path):
    deps = _deps(tmp_path, [_verdict("SUPPORTS")])
    instance = ClaimInstance(id="x", claim="c", citation="r", provided_abstract=None)
    with pytest.raises(InvalidInput):
        verify_claim(instance, PipelineConfig(), deps)


def test_retrieve_mode_missing_abstract_records_no_abstract(tmp_path):
    # No fixtures at all: the abstract cascade misses everywhere, Phase 1 is
    # recorded as NEI with reason no_abstract, and the full-text cascade also
    # misses, so the final verdict is NEI.
    seeds = [
        ("arxiv_api", "https://export.arxiv.org/api/query", 404, "application/json", "{}"),
        ("arxiv_web", "https://arxiv.org/html/2401.00009", 404, "text/html", "x"),
        ("arxiv_web", "https://arxiv.org/pdf/2401.00009", 404, "text/html", "x"),
    ]
    store = FixtureStore(tmp_path)
    store.put(
        "http",
        {"source": "arxiv_api", "method": "GET", "url": "https://export.arxiv.org/api/query",
         "params": {"id_list": "2401.00009"}},
        {"status": 404, "content_type": "application/json", "body_text": "{}"},
    )
    store.put(
        "http",
        {"source": "s2", "method": "GET",
         "url": "https://api.semanticscholar.org/graph/v1/paper/arXiv:2401.00009",
         "params": {"fields": ScholarlyClients._S2_FIELDS}},
        {"status": 404, "content_type": "application/json", "body_text": "{}"},
    )
    for source, url, status, content_type, body in seeds[1:]:
        store.put(
            "http",
            {"source": source, "method": "GET", "url": url, "params": {}},
            {"status": status, "content_type": content_type, **encode_body(body.encode())},
        )
    transport = Transport(mode="replay", fixture_dir=str(tmp_path), clock=FakeClock())
    deps = PipelineDeps(
        clients=ScholarlyClients(transport),
        abstract_verifier=ScriptedLLMBackend("abstract_verifier", []),
        passage_verifier=ScriptedLLMBackend("passage_verifier", []),
        embeddings=HashedTfEmbedding(),
        clock=FakeClock(),
    )
    cfg = PipelineConfig(evidence_mode="retrieve")
    result = verify_claim(_instance(abstract=None), cfg, deps)
    assert result.final is VerdictLabel.NEI
    assert result.phase1.reasoning == "no_abstract"
    assert result.escalated is True


def test_eq1_equivalence_on_replay_bundle(replay_bundle, replay_config, replay_deps, replay_instances):
    output = verify_batch(replay_instances, replay_config, replay_deps)
    for record in output.records:
        assert "result" in record
        doc = record["result"]
        if not doc["escalated"]:
            assert doc["final"] == doc["phase1"]["verdict"]
            assert doc["phase2"] is None
        elif doc["phase2"] is not None:
            assert doc["final"] == doc["phase2"]["verdict"]
        else:
            assert doc["final"] == "NOT_ENOUGH_INFO"


def test_batch_results_in_input_order(replay_bundle, replay_config, replay_deps, replay_instances):
    output = verify_batch(replay_instances, replay_config, replay_deps)
    assert [r["id"] for r in output.records] == [i.id for i in replay_instances]


def test_batch_order_stable_with_multiple_workers(replay_bundle, replay_instances):
    cfg = PipelineConfig(workers=2)
    deps = build_deps(cfg, mode="replay", fixture_dir=str(replay_bundle.fixture_dir))
    output = verify_batch(replay_instances[:3], cfg, deps)
    assert [r["id"] for r in output.records] == [i.id for i in replay_instances[:3]]


def test_batch_rejects_duplicate_ids(tmp_path):
    deps = _deps(tmp_path, [])
    instances = [_instance("dup"), _instance("dup")]
    with pytest.raises(InvalidInput):
        verify_batch(instances, PipelineConfig(), deps)


def test_batch_summary_identity(replay_bundle, replay_config, replay_deps, replay_instances):
    output = verify_batch(replay_instances, replay_config, replay_deps)
    summary = output.summary
    assert summary["resolved_phase1"] + summary["escalated"] + summary["errors"] == summary["total"]
    assert summary["total"] == len(replay_instances)
    assert summary["resolved_phase1"] == 7
    assert summary["escalated"] == 5


def test_batch_isolates_per_instance_failures(tmp_path):
    deps = _deps(tmp_path, [_verdict("SUPPORTS")])
    good = _instance("good")
    bad = ClaimInstance(id="bad", claim="c", citation="r", provided_abstract=None)
    output = verify_batch([good, bad], PipelineConfig(), deps)
    assert "result" in output.records[0]
    assert output.records[1]["error"]["type"] == "InvalidInput"
    assert output.summary["errors"] == 1


def test_expected_verdicts_match_bundle(replay_bundle, replay_config, replay_deps, replay_instances):
    output = verify_batch(replay_instances, replay_config, replay_deps)
    for record in output.records:
        expected = replay_bundle.expected[record["id"]]
        assert record["result"]["final"] == expected.final
        assert record["result"]["escalated"] == expected.escalated
        assert record["result"]["trace"]["final_reason"] == expected.final_reason
