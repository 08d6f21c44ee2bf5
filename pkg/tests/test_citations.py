import json

import pytest

from citecheck.citations import extract_identifiers, llm_parse_citation, parse_citation
from citecheck.errors import BackendError, MalformedResponse, Unparseable
from citecheck.llm import ScriptedLLMBackend


def test_extracts_arxiv_id_with_version():
    parsed = extract_identifiers("Radford et al. Learning transferable models. arXiv:2103.00020v2.")
    assert parsed.arxiv_id == "2103.00020v2"


def test_extracts_doi():
    parsed = extract_identifiers("Harris et al. Array programming. doi:10.1038/s41586-020-2649-2")
    assert parsed.doi == "10.1038/s41586-020-2649-2"


def test_doi_stops_at_whitespace_and_brackets():
    assert extract_identifiers("[doi:10.1000/abc123] more").doi == "10.1000/abc123"
    assert extract_identifiers("(10.1000/x_y-z) trailing").doi == "10.1000/x_y-z"


def test_plain_reference_has_no_fields():
    parsed = extract_identifiers("Smith, J. (2019). A study of things.")
    assert parsed.arxiv_id is None and parsed.doi is None and parsed.url is None and parsed.title is None


def test_arxiv_grammar_rejects_bad_month():
    assert extract_identifiers("value 2113.00020 is not an identifier").arxiv_id is None


def test_url_skips_doi_resolver():
    parsed = extract_identifiers("See https://doi.org/10.1000/x and https://example.org/paper.pdf")
    assert parsed.url == "https://example.org/paper.pdf"
    assert parsed.doi == "10.1000/x"


def test_extract_identifiers_is_deterministic():
    raw = "arXiv:2103.00020v2 doi:10.1/a https://example.org"
    assert extract_identifiers(raw) == extract_identifiers(raw)


def test_llm_parse_echoes_backend_fields():
    backend = ScriptedLLMBackend(
        "parser", [json.dumps({"arxiv_id": "", "doi": "10.1/x", "url": "", "title": "T"})]
    )
    parsed = llm_parse_citation("anything", backend)
    assert parsed.doi == "10.1/x"
    assert parsed.title == "T"
    assert parsed.arxiv_id is None and parsed.url is None


def test_llm_parse_rejects_prose():
    backend = ScriptedLLMBackend("parser", ["I could not find any identifiers, sorry."])
    with pytest.raises(MalformedResponse):
        llm_parse_citation("anything", backend)


def test_llm_parse_propagates_backend_error():
    backend = ScriptedLLMBackend("parser", [BackendError("unreachable")])
    with pytest.raises(BackendError):
        llm_parse_citation("anything", backend)


def test_pattern_doi_wins_over_llm():
    backend = ScriptedLLMBackend(
        "parser",
        [json.dumps({"arxiv_id": "", "doi": "10.9999/wrong", "url": "", "title": "Kept title"})],
    )
    parsed = parse_citation("Paper with doi:10.1038/real-doi here", backend)
    assert parsed.doi == "10.1038/real-doi"
    assert parsed.title == "Kept title"


def test_llm_title_fills_gap():
    backend = ScriptedLLMBackend(
        "parser", [json.dumps({"arxiv_id": "", "doi": "", "url": "", "title": "X"})]
    )
    parsed = parse_citation("An untitled note without identifiers", backend)
    assert parsed.title == "X"


def test_unparseable_without_any_signal():
    with pytest.raises(Unparseable):
        parse_citation("Completely anonymous note")
