"""Corpus and query extraction driven by a tokenization plan."""
from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chunks import Truncation, pack_chunks
from .encoder import ModelSession
from .errors import ExtractorError, PlanFormatError
from .plan import PlanDoc, parse_plan, plan_from_corpus
from .storefile import Mention

__all__ = [
    "ExtractionResult",
    "extract_corpus",
    "extract_queries",
    "render_query_embeddings",
]


@dataclass(frozen=True)
class ExtractionResult:
    mentions: list[Mention]
    doc_ids: list[str]
    truncations: list[Truncation]


def _check_budget(session: ModelSession, max_pieces: int) -> None:
    if max_pieces < 2:
        raise ExtractorError(f"max_pieces must be >= 2, got {max_pieces}")
    if max_pieces > session.max_model_pieces:
        raise ExtractorError(
            f"max_pieces {max_pieces} exceeds the model's position limit "
            f"{session.max_model_pieces}"
        )


def extract_corpus(
    docs: list[PlanDoc],
    session: ModelSession,
    max_pieces: int = 128,
    batch_size: int = 8,
) -> ExtractionResult:
    """Embed every chunk and collect one mention per extractable token.

    Extractable means not stopword-flagged and not truncated. Chunks whose
    every token is truncated are never encoded, but they still occupy a
    chunk index. Word vectors are the mean of the word's piece rows; the
    mean runs in float64 and the stored vector is float32.
    """
    _check_budget(session, max_pieces)
    if batch_size < 1:
        raise ExtractorError(f"batch_size must be >= 1, got {batch_size}")

    work: list[tuple[PlanDoc, int, tuple[int, int]]] = []
    truncations: list[Truncation] = []
    truncated: set[tuple[str, int]] = set()
    for doc in sorted(docs, key=lambda d: d.doc_id):
        counts = [session.piece_count(t.surface) for t in doc.tokens]
        positions = [t.position for t in doc.tokens]
        chunks, truncs = pack_chunks(doc.doc_id, positions, counts, max_pieces)
        truncations.extend(truncs)
        truncated.update((t.doc_id, t.position) for t in truncs)
        for chunk in chunks:
            start, end = chunk.token_span
            span_tokens = doc.tokens[start:end]
            if all((doc.doc_id, t.position) in truncated for t in span_tokens):
                continue
            work.append((doc, chunk.chunk_index, chunk.token_span))

    mentions: list[Mention] = []
    for batch_start in range(0, len(work), batch_size):
        batch = work[batch_start : batch_start + batch_size]
        texts = [
            [t.surface for t in doc.tokens[start:end]]
            for doc, _, (start, end) in batch
        ]
        encoded = session.encode_batch(texts)
        for (doc, chunk_index, (start, end)), enc in zip(batch, encoded):
            pieces = enc.pieces.astype(np.float64)
            for token, (lo, hi) in zip(doc.tokens[start:end], enc.word_spans):
                if token.is_stopword or (doc.doc_id, token.position) in truncated:
                    continue
                vector = pieces[lo:hi].mean(axis=0).astype(np.float32)
                mentions.append(
                    Mention(
                        stem=token.stem,
                        doc_id=doc.doc_id,
                        chunk_index=chunk_index,
                        position=token.position,
                        vector=vector,
                    )
                )
    return ExtractionResult(
        mentions=mentions,
        doc_ids=[d.doc_id for d in docs],
        truncations=truncations,
    )


def _parse_topics(text: str) -> list[tuple[str, str]]:
    topics: list[tuple[str, str]] = []
    seen: set[str] = set()
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        qid, sep, body = line.partition("\t")
        if not sep or not qid.strip() or not body.strip():
            raise PlanFormatError(
                f"topics line {number}: expected query_id<TAB>text, got {line!r}"
            )
        qid = qid.strip()
        if qid in seen:
            raise PlanFormatError(f"topics line {number}: duplicate query id {qid!r}")
        seen.add(qid)
        topics.append((qid, body.strip()))
    return topics


def extract_queries(
    topics_text: str,
    session: ModelSession,
    stemmer: str = "kstem",
    max_pieces: int = 128,
) -> dict:
    """Embed each topic; returns the query-embeddings JSON payload.

    Topics are tokenized by round-tripping them through the retrieval
    package as a one-document-per-query corpus, so query analysis matches
    document analysis exactly. The centroid averages every piece row
    including the special tokens; per-term vectors are piece means per
    word, stopword terms dropped, repeated stems averaged.
    """
    _check_budget(session, max_pieces)
    topics = _parse_topics(topics_text)
    if not topics:
        raise ExtractorError("topics file contains no queries")
    with tempfile.NamedTemporaryFile(
        "w", suffix=".jsonl", delete=False, encoding="utf-8"
    ) as handle:
        for qid, body in topics:
            handle.write(json.dumps({"id": qid, "contents": body}) + "\n")
        temp_path = Path(handle.name)
    try:
        plan = parse_plan(plan_from_corpus(temp_path, stemmer))
    finally:
        temp_path.unlink()
    by_id = {doc.doc_id: doc for doc in plan}

    queries: dict[str, dict] = {}
    for qid, _ in topics:
        doc = by_id.get(qid)
        if doc is None or not doc.tokens:
            raise ExtractorError(f"query {qid!r} has no tokens after analysis")
        total = sum(session.piece_count(t.surface) for t in doc.tokens) + 2
        if total > max_pieces:
            raise ExtractorError(
                f"query {qid!r} needs {total} pieces, limit is {max_pieces}"
            )
        encoded = session.encode_batch([[t.surface for t in doc.tokens]])[0]
        pieces = encoded.pieces.astype(np.float64)
        centroid = pieces.mean(axis=0)
        grouped: dict[str, list[np.ndarray]] = {}
        for token, (lo, hi) in zip(doc.tokens, encoded.word_spans):
            if token.is_stopword:
                continue
            grouped.setdefault(token.stem, []).append(pieces[lo:hi].mean(axis=0))
        per_term = {
            stem: np.mean(vectors, axis=0) if len(vectors) > 1 else vectors[0]
            for stem, vectors in grouped.items()
        }
        queries[qid] = {
            "centroid": [float(x) for x in centroid],
            "per_term": {
                stem: [float(x) for x in vec] for stem, vec in per_term.items()
            },
        }
    return {"dim": session.dim, "queries": queries}


def render_query_embeddings(payload: dict) -> str:
    """Serialize the payload exactly as the retrieval package expects."""
    return json.dumps(payload, sort_keys=True) + "\n"
