"""Clients for arXiv, Semantic Scholar, CrossRef, OpenAlex, and NCBI E-utilities.

Every route goes through the shared transport (rate limiting, 429 retry,
in-run cache, record/replay). Responses are normalized into CandidateRecord;
clean upstream misses raise NotFound, malformed payloads raise ParseError.

API keys and contact addresses come from environment variables only:
``CITECHECK_S2_API_KEY``, ``CITECHECK_NCBI_API_KEY``, ``CITECHECK_MAILTO``.
Base URLs can be overridden with ``CITECHECK_<SOURCE>_BASE`` for testing
against local stand-ins.
"""
from __future__ import annotations

import json
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import NotFound, ParseError, TransportError
from .transport import Transport, TransportResponse

_ATOM_NS = "{http://www.w3.org/2005/Atom}"


@dataclass(frozen=True)
class CandidateRecord:
    """Normalized metadata candidate shared by all sources."""

    title: str = ""
    abstract: str | None = None
    arxiv_id: str | None = None
    doi: str | None = None
    pmcid: str | None = None
    pdf_url: str | None = None
    url: str | None = None


def _base(env_key: str, default: str) -> str:
    return os.environ.get(env_key, default).rstrip("/")


class ScholarlyClients:
    """All metadata and full-text routes behind one transport."""

    def __init__(self, transport: Transport):
        self.transport = transport

    # -- arXiv ---------------------------------------------------------------

    def arxiv_metadata(self, arxiv_id: str) -> CandidateRecord:
        base = _base("CITECHECK_ARXIV_API_BASE", "https://export.arxiv.org/api")
        response = self._get("arxiv_api", f"{base}/query", {"id_list": arxiv_id})
        try:
            root = ET.fromstring(response.text)
        except ET.ParseError as exc:
            raise ParseError(f"arxiv feed for {arxiv_id} is not valid XML") from exc
        entry = root.find(f"{_ATOM_NS}entry")
        if entry is None:
            raise NotFound(f"arxiv has no entry for {arxiv_id}")
        title = _text(entry.find(f"{_ATOM_NS}title"))
        summary = _text(entry.find(f"{_ATOM_NS}summary"))
        if not title and not summary:
            raise NotFound(f"arxiv entry for {arxiv_id} carries no metadata")
        return CandidateRecord(
            title=title,
            abstract=summary or None,
            arxiv_id=arxiv_id,
            url=_text(entry.find(f"{_ATOM_NS}id")) or None,
        )

    def arxiv_html(self, arxiv_id: str) -> tuple[bytes, str]:
        base = _base("CITECHECK_ARXIV_WEB_BASE", "https://arxiv.org")
        return self.fetch_url(f"{base}/html/{arxiv_id}", source="arxiv_web")

    def arxiv_pdf(self, arxiv_id: str) -> tuple[bytes, str]:
        base = _base("CITECHECK_ARXIV_WEB_BASE", "https://arxiv.org")
        return self.fetch_url(f"{base}/pdf/{arxiv_id}", source="arxiv_web")

    # -- Semantic Scholar ------------------------------------------------------

    _S2_FIELDS = "title,abstract,externalIds,openAccessPdf"

    def s2_paper_by_arxiv(self, arxiv_id: str) -> CandidateRecord:
        bare = re.sub(r"v\d+$", "", arxiv_id)
        return self._s2_paper(f"arXiv:{bare}")

    def s2_paper_by_doi(self, doi: str) -> CandidateRecord:
        return self._s2_paper(f"DOI:{doi}")

    def _s2_paper(self, paper_id: str) -> CandidateRecord:
        base = _base("CITECHECK_S2_BASE", "https://api.semanticscholar.org/graph/v1")
        response = self._get(
            "s2", f"{base}/paper/{paper_id}", {"fields": self._S2_FIELDS}
        )
        return self._parse_s2_paper(_json(response, "semantic scholar"))

    def s2_title_search(self, title: str) -> CandidateRecord:
        base = _base("CITECHECK_S2_BASE", "https://api.semanticscholar.org/graph/v1")
        response = self._get(
            "s2",
            f"{base}/paper/search",
            {"query": title, "fields": self._S2_FIELDS, "limit": "1"},
        )
        doc = _json(response, "semantic scholar")
        hits = doc.get("data") or []
        if not hits:
            raise NotFound(f"semantic scholar has no match for title {title!r}")
        return self._parse_s2_paper(hits[0])

    def s2_oa_pdf_url(self, paper_id: str) -> str:
        """Open-access PDF URL for a paper id such as ``arXiv:2103.00020``."""
        record = self._s2_paper(paper_id)
        if not record.pdf_url:
            raise NotFound(f"no open-access pdf for {paper_id}")
        return record.pdf_url

    @staticmethod
    def _parse_s2_paper(doc: dict) -> CandidateRecord:
        if not isinstance(doc, dict):
            raise ParseError("semantic scholar paper payload is not an object")
        external = doc.get("externalIds") or {}
        oa = doc.get("openAccessPdf") or {}
        return CandidateRecord(
            title=doc.get("title") or "",
            abstract=doc.get("abstract") or None,
            arxiv_id=external.get("ArXiv"),
            doi=external.get("DOI"),
            pdf_url=oa.get("url"),
        )

    # -- CrossRef --------------------------------------------------------------

    def crossref_title_search(self, title: str) -> CandidateRecord:
        base = _base("CITECHECK_CROSSREF_BASE", "https://api.crossref.org")
        params = {"query.title": title, "rows": "1"}
        mailto = os.environ.get("CITECHECK_MAILTO")
        if mailto:
            params["mailto"] = mailto
        response = self._get("crossref", f"{base}/works", params)
        doc = _json(response, "crossref")
        items = (doc.get("message") or {}).get("items") or []
        if not items:
            raise NotFound(f"crossref has no match for title {title!r}")
        item = items[0]
        titles = item.get("title") or []
        return CandidateRecord(
            title=titles[0] if titles else "",
            abstract=_strip_markup(item.get("abstract") or "") or None,
            doi=item.get("DOI"),
            url=item.get("URL"),
        )

    # -- OpenAlex ----------------------------------------------------------------

    def openalex_by_doi(self, doi: str) -> CandidateRecord:
        base = _base("CITECHECK_OPENALEX_BASE", "https://api.openalex.org")
        response = self._get("openalex", f"{base}/works/https://doi.org/{doi}", {})
        return self._parse_openalex_work(_json(response, "openalex"))

    def openalex_title_search(self, title: str) -> CandidateRecord:
        base = _base("CITECHECK_OPENALEX_BASE", "https://api.openalex.org")
        response = self._get(
            "openalex", f"{base}/works", {"filter": f"title.search:{title}", "per-page": "1"}
        )
        doc = _json(response, "openalex")
        results = doc.get("results") or []
        if not results:
            raise NotFound(f"openalex has no match for title {title!r}")
        return self._parse_openalex_work(results[0])

    @staticmethod
    def _parse_openalex_work(doc: dict) -> CandidateRecord:
        if not isinstance(doc, dict):
            raise ParseError("openalex work payload is not an object")
        doi = doc.get("doi") or ""
        doi = doi.removeprefix("https://doi.org/") or None
        location = doc.get("primary_location") or {}
        return CandidateRecord(
            title=doc.get("title") or doc.get("display_name") or "",
            abstract=_from_inverted_index(doc.get("abstract_inverted_index")),
            doi=doi,
            pdf_url=location.get("pdf_url"),
            url=location.get("landing_page_url"),
        )

    # -- PubMed / PMC ------------------------------------------------------------

    def pubmed_title_search(self, title: str) -> CandidateRecord:
        base = _base("CITECHECK_EUTILS_BASE", "https://eutils.ncbi.nlm.nih.gov/entrez/eutils")
        params = {"db": "pubmed", "term": f"{title}[Title]", "retmode": "json", "retmax": "1"}
        api_key = os.environ.get("CITECHECK_NCBI_API_KEY")
        if api_key:
            params["api_key"] = api_key
        response = self._get("eutils", f"{base}/esearch.fcgi", params)
        doc = _json(response, "pubmed esearch")
        ids = (doc.get("esearchresult") or {}).get("idlist") or []
        if not ids:
            raise NotFound(f"pubmed has no match for title {title!r}")

        fetch_params = {"db": "pubmed", "id": ids[0], "retmode": "xml"}
        if api_key:
            fetch_params["api_key"] = api_key
        fetched = self._get("eutils", f"{base}/efetch.fcgi", fetch_params)
        return self._parse_pubmed_article(fetched.text, ids[0])

    @staticmethod
    def _parse_pubmed_article(xml_text: str, pmid: str) -> CandidateRecord:
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise ParseError(f"pubmed efetch for {pmid} is not valid XML") from exc
        article = root.find(".//PubmedArticle")
        if article is None:
            raise NotFound(f"pubmed has no article for id {pmid}")
        title = _text(article.find(".//ArticleTitle"))
        abstract_parts = [
            _text(node) for node in article.findall(".//Abstract/AbstractText")
        ]
        abstract = " ".join(part for part in abstract_parts if part).strip() or None
        pmcid = None
        doi = None
        for id_node in article.findall(".//ArticleIdList/ArticleId"):
            id_type = id_node.get("IdType", "")
            if id_type == "pmc":
                pmcid = _text(id_node)
            elif id_type == "doi":
                doi = _text(id_node)
        return CandidateRecord(title=title, abstract=abstract, doi=doi, pmcid=pmcid)

    def pmc_fulltext_xml(self, pmcid: str) -> bytes:
        base = _base("CITECHECK_EUTILS_BASE", "https://eutils.ncbi.nlm.nih.gov/entrez/eutils")
        params = {"db": "pmc", "id": pmcid, "retmode": "xml"}
        api_key = os.environ.get("CITECHECK_NCBI_API_KEY")
        if api_key:
            params["api_key"] = api_key
        response = self._get("eutils", f"{base}/efetch.fcgi", params)
        return response.body

    # -- generic -------------------------------------------------------------------

    def fetch_url(self, url: str, source: str = "web") -> tuple[bytes, str]:
        """Raw GET returning (body, content-type)."""
        response = self._get(source, url, {})
        return response.body, response.content_type

    def _get(self, source: str, url: str, params: dict[str, str]) -> TransportResponse:
        headers = None
        if source == "s2":
            api_key = os.environ.get("CITECHECK_S2_API_KEY")
            if api_key:
                headers = {"x-api-key": api_key}
        response = self.transport.request(source, url, params, headers=headers)
        if response.status == 404:
            raise NotFound(f"HTTP 404 for {url}")
        if response.status >= 400:
            raise TransportError(f"HTTP {response.status} for {url}")
        return response


def _text(node) -> str:
    if node is None:
        return ""
    return "".join(node.itertext()).strip()


def _json(response: TransportResponse, label: str) -> dict:
    try:
        return json.loads(response.text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{label} returned malformed JSON") from exc


def _strip_markup(text: str) -> str:
    return re.sub(r"<[^>]+>", " ", text).strip()


def _from_inverted_index(index: dict | None) -> str | None:
    """Rebuild abstract text from the OpenAlex inverted index."""
    if not index:
        return None
    positions: list[tuple[int, str]] = []
    for word, offsets in index.items():
        for offset in offsets:
            positions.append((offset, word))
    positions.sort()
    return " ".join(word for _, word in positions) or None
