"""Plain-text extraction from HTML, JATS XML, and PDF documents.

PDF extraction is pluggable: a minimal built-in parser handles well-formed
PDFs, and an adapter can shell out to ``pdftotext`` when it is installed.
All extracted text is truncated to the configured character cap.
"""
from __future__ import annotations

import re
import shutil
import subprocess
import xml.etree.ElementTree as ET
import zlib
from html.parser import HTMLParser
from typing import Protocol

from .errors import ExtractionFailed, UnsupportedFormat

FORMATS = ("pdf", "xml", "html")

_BLOCK_TAGS = {
    "p", "div", "br", "li", "tr", "ul", "ol", "table", "section", "article",
    "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre", "header", "footer",
}
_SKIP_TAGS = {"script", "style", "noscript", "template"}


class _VisibleTextParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self._skip_depth = 0
        self.parts: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS and self._skip_depth > 0:
            self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if self._skip_depth == 0 and data:
            self.parts.append(data)


def html_to_text(data: bytes | str) -> str:
    """Visible text of an HTML page, script/style removed, blocks on own lines."""
    markup = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
    parser = _VisibleTextParser()
    parser.feed(markup)
    parser.close()
    text = "".join(parser.parts)
    text = re.sub(r"[ \t]+", " ", text)
    text = re.sub(r" ?\n ?", "\n", text)
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text.strip()


_JATS_SKIP = {"ref-list", "fig", "table-wrap", "fn-group", "ack"}


def jats_to_text(data: bytes | str) -> str:
    """Concatenated paragraph text of a JATS <body>, skipping references and figures."""
    markup = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
    try:
        root = ET.fromstring(markup)
    except ET.ParseError as exc:
        raise ExtractionFailed("document is not well-formed XML") from exc

    paragraphs: list[str] = []

    def walk(node):
        tag = node.tag.rsplit("}", 1)[-1]
        if tag in _JATS_SKIP:
            return
        if tag == "p":
            text = " ".join("".join(node.itertext()).split())
            if text:
                paragraphs.append(text)
            return
        for child in node:
            walk(child)

    for body in root.iter():
        if body.tag.rsplit("}", 1)[-1] == "body":
            walk(body)
    return "\n\n".join(paragraphs)


class PdfExtractor(Protocol):
    def extract(self, data: bytes) -> str: ...


class BuiltinPdfExtractor:
    """Text from well-formed PDFs by decoding content streams directly.

    Handles uncompressed and Flate-compressed streams and the Tj/TJ/' text
    operators, which covers programmatically generated articles; scanned or
    exotic PDFs need the external-tool adapter.
    """

    def extract(self, data: bytes) -> str:
        if not data.startswith(b"%PDF"):
            raise ExtractionFailed("missing %PDF header")
        chunks: list[str] = []
        for stream in self._streams(data):
            content = self._inflate(stream)
            if content is None:
                continue
            text = self._text_ops(content)
            if text:
                chunks.append(text)
        return "\n".join(chunks)

    @staticmethod
    def _streams(data: bytes):
        for match in re.finditer(rb"stream\r?\n(.*?)endstream", data, re.DOTALL):
            yield match.group(1)

    @staticmethod
    def _inflate(stream: bytes) -> bytes | None:
        try:
            return zlib.decompress(stream)
        except zlib.error:
            # Not Flate-compressed; assume a raw content stream.
            return stream

    def _text_ops(self, content: bytes) -> str:
        try:
            text = content.decode("latin-1")
        except UnicodeDecodeError:
            return ""
        if "BT" not in text:
            return ""
        out: list[str] = []
        for match in re.finditer(r"\((?:[^()\\]|\\.)*\)\s*(?:Tj|')|\[(?:[^\[\]\\]|\\.)*\]\s*TJ", text):
            token = match.group(0)
            if token.endswith("TJ"):
                for literal in re.finditer(r"\((?:[^()\\]|\\.)*\)", token):
                    out.append(_unescape_pdf_string(literal.group(0)[1:-1]))
            else:
                literal = token[token.index("(") + 1 : token.rindex(")")]
                out.append(_unescape_pdf_string(literal))
            out.append(" " if not token.endswith("'") else "\n")
        return "".join(out).strip()


class PdftotextExtractor:
    """Adapter around the poppler ``pdftotext`` binary."""

    def __init__(self, binary: str = "pdftotext"):
        self.binary = binary

    def available(self) -> bool:
        return shutil.which(self.binary) is not None

    def extract(self, data: bytes) -> str:
        if not self.available():
            raise ExtractionFailed(f"{self.binary} is not installed")
        try:
            proc = subprocess.run(
                [self.binary, "-q", "-", "-"],
                input=data,
                capture_output=True,
                timeout=120,
                check=True,
            )
        except (subprocess.SubprocessError, OSError) as exc:
            raise ExtractionFailed(f"{self.binary} failed: {exc}") from exc
        return proc.stdout.decode("utf-8", errors="replace")


_ESCAPES = {"n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f", "(": "(", ")": ")", "\\": "\\"}


def _unescape_pdf_string(raw: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        i += 1
        if i >= len(raw):
            break
        nxt = raw[i]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 1
        elif nxt in "01234567":
            digits = ""
            for ch2 in raw[i : i + 3]:
                if ch2 not in "01234567":
                    break
                digits += ch2
            out.append(chr(int(digits, 8)))
            i += len(digits)
        else:
            out.append(nxt)
            i += 1
    return "".join(out)


def extract_text(
    data: bytes,
    format: str,
    max_chars: int = 500_000,
    pdf_extractor: PdfExtractor | None = None,
) -> str:
    """Convert document bytes to plain text and truncate to max_chars."""
    if format == "html":
        text = html_to_text(data)
    elif format == "xml":
        text = jats_to_text(data)
    elif format == "pdf":
        extractor = pdf_extractor or BuiltinPdfExtractor()
        text = extractor.extract(data)
    else:
        raise UnsupportedFormat(f"cannot extract format {format!r}")
    return text[:max_chars]


def format_from_content_type(content_type: str, url: str = "") -> str | None:
    """Map a content-type header (or URL suffix) to pdf/xml/html."""
    lowered = content_type.lower()
    if "pdf" in lowered:
        return "pdf"
    if "html" in lowered:
        return "html"
    if "xml" in lowered:
        return "xml"
    path = url.split("?", 1)[0].lower()
    if path.endswith(".pdf"):
        return "pdf"
    if path.endswith((".html", ".htm")):
        return "html"
    if path.endswith(".xml"):
        return "xml"
    return None


def abstract_from_html(data: bytes | str, min_block_chars: int = 400) -> str | None:
    """Heuristic abstract pull for the URL-direct fallback tier.

    Returns the first block of at least ``min_block_chars`` characters that
    follows an "abstract" heading in the visible text, or the remainder of a
    block that starts with the heading inline.
    """
    text = html_to_text(data)
    blocks = [b.strip() for b in re.split(r"\n\s*\n|\n", text) if b.strip()]
    for index, block in enumerate(blocks):
        lowered = block.lower()
        if lowered.rstrip(":. ") == "abstract":
            for later in blocks[index + 1 :]:
                if len(later) >= min_block_chars:
                    return later
            return None
        if lowered.startswith("abstract"):
            remainder = block[len("abstract") :].lstrip(":. —-")
            if len(remainder) >= min_block_chars:
                return remainder
    return None
