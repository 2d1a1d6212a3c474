"""Document chunking and WordPiece-to-word aggregation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..corpus import Document

__all__ = ["Chunk", "TruncationWarning", "chunk_document", "aggregate_wordpieces"]


@dataclass(frozen=True)
class Chunk:
    """Contiguous token span of one document; spans tile the document in order."""

    doc_id: str
    chunk_index: int
    token_span: tuple[int, int]


@dataclass(frozen=True)
class TruncationWarning:
    """Records a single word whose pieces exceeded the chunk budget."""

    doc_id: str
    position: int
    piece_count: int
    budget: int


def chunk_document(
    doc: Document,
    max_pieces: int,
    piece_counts: Sequence[int] | Callable[[str], int] | None = None,
    warnings: list[TruncationWarning] | None = None,
) -> list[Chunk]:
    """Greedy left-to-right packing under a piece budget of max_pieces - 2.

    Two piece slots are reserved for the encoder's start/end special tokens.
    A chunk closes when the next whole word would overflow the budget; words
    are never split across chunks. A single word larger than the budget gets
    a chunk of its own and a TruncationWarning (the encoder must clip it).

    piece_counts gives the WordPiece count per token, either as a sequence
    aligned with doc.tokens or as a callable on the surface form. The
    default of one piece per word matches the deterministic test embedder.
    """
    if max_pieces < 2:
        raise ValueError(f"max_pieces must be >= 2, got {max_pieces}")
    budget = max_pieces - 2
    if piece_counts is None:
        counts = [1] * len(doc.tokens)
    elif callable(piece_counts):
        counts = [piece_counts(t.surface) for t in doc.tokens]
    else:
        counts = list(piece_counts)
        if len(counts) != len(doc.tokens):
            raise ValueError(
                f"piece_counts has {len(counts)} entries for {len(doc.tokens)} tokens"
            )

    chunks: list[Chunk] = []
    start = 0
    used = 0
    for i, count in enumerate(counts):
        if count > budget:
            if i > start:
                chunks.append(Chunk(doc.doc_id, len(chunks), (start, i)))
            chunks.append(Chunk(doc.doc_id, len(chunks), (i, i + 1)))
            if warnings is not None:
                warnings.append(
                    TruncationWarning(doc.doc_id, doc.tokens[i].position, count, budget)
                )
            start = i + 1
            used = 0
            continue
        if used + count > budget:
            chunks.append(Chunk(doc.doc_id, len(chunks), (start, i)))
            start = i
            used = 0
        used += count
    if start < len(counts):
        chunks.append(Chunk(doc.doc_id, len(chunks), (start, len(counts))))
    return chunks


def aggregate_wordpieces(
    piece_vectors: Sequence[np.ndarray] | np.ndarray,
    word_spans: Sequence[tuple[int, int]],
) -> list[np.ndarray]:
    """Mean-pool piece vectors over each word span.

    Spans must be non-empty and pairwise disjoint; output order follows the
    span order, so permuting spans permutes the result. Spans need not cover
    every piece (sequence special tokens carry no span).
    """
    pieces = np.asarray(piece_vectors, dtype=float)
    if pieces.ndim != 2:
        raise ValueError(f"piece_vectors must be a 2-d array, got shape {pieces.shape}")
    for start, end in word_spans:
        if end <= start:
            raise ValueError(f"empty word span [{start}, {end})")
        if start < 0 or end > len(pieces):
            raise ValueError(f"span [{start}, {end}) exceeds {len(pieces)} pieces")
    ordered = sorted(word_spans)
    for (_, prev_end), (next_start, _) in zip(ordered, ordered[1:]):
        if next_start < prev_end:
            raise ValueError("word spans overlap")
    return [pieces[start:end].mean(axis=0) for start, end in word_spans]
