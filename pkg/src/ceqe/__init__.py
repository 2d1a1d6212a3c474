"""Contextualized embedding query expansion with feedback baselines.

The package splits into tokenization and corpus ingestion (text, corpus),
an inverted index with BM25 and query-likelihood scoring (index), mention
embedding extraction and storage (embed), the expansion models themselves
(expansion), TREC-style evaluation (evaluation), parameter tuning
(tuning), intrinsic term labeling (intrinsic), and the method dispatch
that ties them together (pipeline, cli).
"""
from .corpus import Document, IngestError, ingest_auto, ingest_jsonl, ingest_trec_sgml
from .errors import (
    ConfigurationError,
    CorpusFormatError,
    RunFormatError,
    UnknownDocumentError,
)
from .evaluation import (
    MetricReport,
    TTestResult,
    evaluate_run,
    paired_t_test,
    parse_qrels,
    parse_run,
    write_run,
)
from .expansion import (
    ExpansionParams,
    FeedbackSet,
    FilterPolicy,
    TermDistribution,
    ceqe_centroid,
    ceqe_term_pool,
    compute_posteriors,
    execute_expanded,
    interpolate,
    rm_expand,
    static_embed_expand,
)
from .index import Index, Ranking, bm25_search, ql_log_score
from .pipeline import METHODS, Pipeline, run_queries
from .text import STOPWORDS, Token, kstem, porter_stem, tokenize

__version__ = "0.1.0"

__all__ = [
    "Document",
    "IngestError",
    "ingest_auto",
    "ingest_jsonl",
    "ingest_trec_sgml",
    "ConfigurationError",
    "CorpusFormatError",
    "RunFormatError",
    "UnknownDocumentError",
    "MetricReport",
    "TTestResult",
    "evaluate_run",
    "paired_t_test",
    "parse_qrels",
    "parse_run",
    "write_run",
    "ExpansionParams",
    "FeedbackSet",
    "FilterPolicy",
    "TermDistribution",
    "ceqe_centroid",
    "ceqe_term_pool",
    "compute_posteriors",
    "execute_expanded",
    "interpolate",
    "rm_expand",
    "static_embed_expand",
    "Index",
    "Ranking",
    "bm25_search",
    "ql_log_score",
    "METHODS",
    "Pipeline",
    "run_queries",
    "STOPWORDS",
    "Token",
    "kstem",
    "porter_stem",
    "tokenize",
    "__version__",
]
