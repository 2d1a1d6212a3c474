"""Corpus ingestion: TREC SGML and JSONL readers producing tokenized Documents."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Union

from .errors import CorpusFormatError
from .text import STOPWORDS, Token, tokenize

__all__ = ["Document", "IngestError", "ingest_trec_sgml", "ingest_jsonl"]


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class IngestError:
    """One recoverable record-level problem, with its location in the input."""

    message: str
    byte_offset: int | None = None
    line_number: int | None = None


_DOC_RE = re.compile(rb"<DOC>(.*?)</DOC>", re.DOTALL)
_DOCNO_RE = re.compile(rb"<DOCNO>(.*?)</DOCNO>", re.DOTALL)
_CONTENT_RE = re.compile(rb"<(TEXT|HEADLINE)>(.*?)</\1>", re.DOTALL)
_TAG_RE = re.compile(rb"<[^>]*>")


def _as_bytes(stream: Union[bytes, BinaryIO]) -> bytes:
    if isinstance(stream, (bytes, bytearray)):
        return bytes(stream)
    return stream.read()


def _record_error(
    problem: IngestError,
    errors: list[IngestError] | None,
) -> None:
    if errors is None:
        location = ""
        if problem.byte_offset is not None:
            location = f" at byte offset {problem.byte_offset}"
        elif problem.line_number is not None:
            location = f" at line {problem.line_number}"
        raise CorpusFormatError(problem.message + location)
    errors.append(problem)


def _build_document(doc_id: str, raw_text: str, stopword_list, stemmer_id) -> Document:
    return Document(
        doc_id=doc_id,
        raw_text=raw_text,
        tokens=tuple(tokenize(raw_text, stopword_list, stemmer_id)),
    )


def ingest_trec_sgml(
    stream: Union[bytes, BinaryIO],
    stopword_list: frozenset[str] = STOPWORDS,
    stemmer_id: str = "kstem",
    errors: list[IngestError] | None = None,
) -> list[Document]:
    """Parse concatenated <DOC> records.

    doc_id comes from the trimmed <DOCNO>; raw_text is the concatenated
    <TEXT> and <HEADLINE> content with any residual markup stripped. TREC
    collections are SGML-ish rather than well-formed XML, so records are
    located by scanning, not by an XML parser.

    When ``errors`` is given, bad records are skipped and reported there;
    otherwise the first problem raises CorpusFormatError. Byte offsets refer
    to the undecoded input.
    """
    data = _as_bytes(stream)
    documents: list[Document] = []
    seen: set[str] = set()
    end_of_last = 0
    for record in _DOC_RE.finditer(data):
        end_of_last = record.end()
        body = record.group(1)
        docno = _DOCNO_RE.search(body)
        if docno is None:
            _record_error(
                IngestError("record missing <DOCNO>", byte_offset=record.start()),
                errors,
            )
            continue
        doc_id = docno.group(1).decode("utf-8", "replace").strip()
        if not doc_id:
            _record_error(
                IngestError("record has empty <DOCNO>", byte_offset=record.start()),
                errors,
            )
            continue
        if doc_id in seen:
            raise CorpusFormatError(f"duplicate doc_id {doc_id!r}")
        parts = []
        for section in _CONTENT_RE.finditer(body):
            stripped = _TAG_RE.sub(b" ", section.group(2))
            parts.append(stripped.decode("utf-8", "replace").strip())
        raw_text = "\n".join(p for p in parts if p)
        documents.append(_build_document(doc_id, raw_text, stopword_list, stemmer_id))
        seen.add(doc_id)

    if data.find(b"<DOC>", end_of_last) != -1:
        last = documents[-1].doc_id if documents else "(none)"
        raise CorpusFormatError(
            f"truncated final record after last complete doc {last!r}"
        )
    return documents


def ingest_jsonl(
    stream: Union[bytes, BinaryIO],
    stopword_list: frozenset[str] = STOPWORDS,
    stemmer_id: str = "kstem",
    errors: list[IngestError] | None = None,
) -> list[Document]:
    """Parse one JSON object per line with string fields "id" and "contents"."""
    data = _as_bytes(stream)
    documents: list[Document] = []
    seen: set[str] = set()
    for line_number, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _record_error(
                IngestError(f"malformed JSON ({exc.msg})", line_number=line_number),
                errors,
            )
            continue
        doc_id = obj.get("id") if isinstance(obj, dict) else None
        contents = obj.get("contents") if isinstance(obj, dict) else None
        if not isinstance(doc_id, str) or not isinstance(contents, str):
            _record_error(
                IngestError(
                    'line must be an object with string "id" and "contents"',
                    line_number=line_number,
                ),
                errors,
            )
            continue
        if doc_id in seen:
            raise CorpusFormatError(f"duplicate doc_id {doc_id!r}")
        documents.append(
            _build_document(doc_id, contents, stopword_list, stemmer_id)
        )
        seen.add(doc_id)
    return documents


def detect_corpus_format(head: bytes) -> str:
    """Classify a corpus by its first non-whitespace bytes: "trec" or "jsonl"."""
    stripped = head.lstrip()
    if stripped.startswith(b"<"):
        return "trec"
    return "jsonl"


def ingest_auto(
    stream: Union[bytes, BinaryIO],
    stopword_list: frozenset[str] = STOPWORDS,
    stemmer_id: str = "kstem",
    errors: list[IngestError] | None = None,
) -> list[Document]:
    data = _as_bytes(stream)
    if detect_corpus_format(data[:64]) == "trec":
        return ingest_trec_sgml(data, stopword_list, stemmer_id, errors)
    return ingest_jsonl(data, stopword_list, stemmer_id, errors)


def corpus_vocabulary(documents: Iterable[Document]) -> set[str]:
    """Distinct non-stopword stems across the documents."""
    vocab: set[str] = set()
    for doc in documents:
        vocab.update(t.stem for t in doc.tokens if not t.is_stopword)
    return vocab
