"""Query-side embedding: centroid and per-term representations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..text import Token
from .chunking import aggregate_wordpieces
from .providers import EmbeddingProvider

__all__ = ["QueryEmbedding", "embed_query"]


@dataclass(frozen=True)
class QueryEmbedding:
    """Centroid over every query piece (special tokens included) plus one
    vector per non-stopword query stem (special tokens excluded)."""

    query_id: str
    centroid: np.ndarray
    per_term: dict[str, np.ndarray]


def embed_query(
    query_tokens: Sequence[Token],
    provider: EmbeddingProvider,
    query_id: str = "",
) -> QueryEmbedding:
    """Encode a query once and derive both representations.

    The centroid is the mean of all piece vectors including the start/end
    special tokens. Per-term vectors are piece means per word; stopword
    terms are dropped from the per-term map, and a stem occurring multiple
    times in the query gets the mean of its occurrence vectors.
    """
    tokens = list(query_tokens)
    if not tokens:
        raise ValueError("empty query")
    words = [t.stem if provider.prepares == "stem" else t.surface for t in tokens]
    encoded = provider.encode(words)
    centroid = np.asarray(encoded.pieces, dtype=float).mean(axis=0)
    word_vectors = aggregate_wordpieces(encoded.pieces, encoded.word_spans)
    grouped: dict[str, list[np.ndarray]] = {}
    for token, vector in zip(tokens, word_vectors):
        if token.is_stopword:
            continue
        grouped.setdefault(token.stem, []).append(vector)
    per_term = {
        stem: np.mean(vectors, axis=0) if len(vectors) > 1 else vectors[0]
        for stem, vectors in grouped.items()
    }
    return QueryEmbedding(query_id=query_id, centroid=centroid, per_term=per_term)
