"""Packing plan tokens into encoder-sized chunks.

The packing rule must match the retrieval package exactly, because chunk
indices are part of the mention store contract: a mention's chunk_index
must mean the same chunk on both sides. The rule is greedy left-to-right
under a budget of max_pieces minus the two special-token slots, words
never split, and a single word over the budget gets a chunk of its own
plus a truncation record (its vectors are never extracted).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = ["TokenChunk", "Truncation", "pack_chunks"]


@dataclass(frozen=True)
class TokenChunk:
    chunk_index: int
    token_span: tuple[int, int]


@dataclass(frozen=True)
class Truncation:
    doc_id: str
    position: int
    piece_count: int
    budget: int


def pack_chunks(
    doc_id: str,
    positions: Sequence[int],
    piece_counts: Sequence[int],
    max_pieces: int,
) -> tuple[list[TokenChunk], list[Truncation]]:
    """Tile the token sequence into chunks; returns chunks and truncations.

    Chunk indices count every chunk including truncated single-word ones,
    so indices stay aligned with a consumer that skips those chunks.
    """
    if max_pieces < 2:
        raise ValueError(f"max_pieces must be >= 2, got {max_pieces}")
    if len(positions) != len(piece_counts):
        raise ValueError(
            f"{len(positions)} positions for {len(piece_counts)} piece counts"
        )
    budget = max_pieces - 2
    chunks: list[TokenChunk] = []
    truncations: list[Truncation] = []
    start = 0
    used = 0
    for i, count in enumerate(piece_counts):
        if count > budget:
            if i > start:
                chunks.append(TokenChunk(len(chunks), (start, i)))
            chunks.append(TokenChunk(len(chunks), (i, i + 1)))
            truncations.append(Truncation(doc_id, positions[i], count, budget))
            start = i + 1
            used = 0
            continue
        if used + count > budget:
            chunks.append(TokenChunk(len(chunks), (start, i)))
            start = i
            used = 0
        used += count
    if start < len(piece_counts):
        chunks.append(TokenChunk(len(chunks), (start, len(piece_counts))))
    return chunks, truncations
