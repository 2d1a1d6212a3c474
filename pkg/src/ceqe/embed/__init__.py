from .chunking import Chunk, TruncationWarning, aggregate_wordpieces, chunk_document
from .providers import (
    DeterministicTestProvider,
    EmbeddingProvider,
    EncodedText,
    RemoteProvider,
    deterministic_test_embedder,
)
from .query import QueryEmbedding, embed_query
from .store import MentionEmbedding, MentionStore, build_mention_store, mentions_of, write_mention_store

__all__ = [
    "Chunk",
    "TruncationWarning",
    "aggregate_wordpieces",
    "chunk_document",
    "DeterministicTestProvider",
    "EmbeddingProvider",
    "EncodedText",
    "RemoteProvider",
    "deterministic_test_embedder",
    "QueryEmbedding",
    "embed_query",
    "MentionEmbedding",
    "MentionStore",
    "build_mention_store",
    "mentions_of",
    "write_mention_store",
]
