"""Contextualized mention-vector extraction for the retrieval package.

Turns a tokenization plan (the output of the retrieval package's
``ceqe extract-plan`` command) into the binary mention store and the
query-embeddings JSON that package consumes, and can serve the same
per-piece vectors over HTTP for its remote provider. Vectors come from a
transformer hidden-state layer; word vectors are WordPiece means.
"""
from .chunks import TokenChunk, Truncation, pack_chunks
from .encoder import EncodedWords, ModelSession
from .errors import ExtractorError, PlanFormatError
from .extract import (
    ExtractionResult,
    extract_corpus,
    extract_queries,
    render_query_embeddings,
)
from .plan import PlanDoc, PlanToken, parse_plan, plan_from_corpus
from .storefile import Mention, write_store

__version__ = "0.1.0"

__all__ = [
    "TokenChunk",
    "Truncation",
    "pack_chunks",
    "EncodedWords",
    "ModelSession",
    "ExtractorError",
    "PlanFormatError",
    "ExtractionResult",
    "extract_corpus",
    "extract_queries",
    "render_query_embeddings",
    "PlanDoc",
    "PlanToken",
    "parse_plan",
    "plan_from_corpus",
    "Mention",
    "write_store",
    "__version__",
]
