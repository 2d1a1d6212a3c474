"""End-to-end retrieval runs: asset loading and method dispatch.

A method names one retrieval configuration from the evaluation matrix:
plain BM25, relevance-model feedback (rm3), static-embedding expansion over
a global or feedback-restricted vocabulary, and the three CEQE variants.
Expansion methods share one harness: BM25 first pass, feedback posteriors,
an expansion TermDistribution, interpolation with the original query, and
a weighted-QL rerank of the whole collection.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from .config import Config
from .corpus import Document, ingest_auto
from .embed.providers import DeterministicTestProvider, EmbeddingProvider, RemoteProvider
from .embed.query import QueryEmbedding, embed_query
from .embed.store import MentionStore, build_mention_store
from .errors import ConfigurationError, CorpusFormatError
from .evaluation import Source, _as_text
from .expansion import (
    FilterPolicy,
    TermDistribution,
    ceqe_centroid,
    ceqe_term_pool,
    compute_posteriors,
    execute_expanded,
    interpolate,
    load_static_vectors,
    query_mle,
    rm_expand,
    static_embed_expand,
)
from .index import Index, Ranking, bm25_search
from .text import STOPWORDS, Token, resolve_stemmer, tokenize

__all__ = [
    "METHODS",
    "Pipeline",
    "parse_topics",
    "filter_policy",
    "make_tag",
    "build_provider",
    "load_query_embeddings",
    "write_query_embeddings",
    "run_queries",
    "expansion_model",
]

METHODS = (
    "bm25",
    "rm3",
    "static",
    "static-prf",
    "ceqe-centroid",
    "ceqe-max",
    "ceqe-mul",
)

EXTRACTOR_HINT = "build one with `ceqe-extractor extract --corpus ... --output ...`"
QUERY_EMBED_HINT = "produce them with `ceqe-extractor extract-queries --topics ... --output ...`"


def parse_topics(source: Source) -> list[tuple[str, str]]:
    """Read `query_id<TAB>query text` lines, preserving file order."""
    topics: list[tuple[str, str]] = []
    seen: set[str] = set()
    for number, line in enumerate(_as_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        qid, sep, text = line.partition("\t")
        if not sep or not qid.strip() or not text.strip():
            raise CorpusFormatError(
                f"topics line {number}: expected query_id<TAB>text, got {line!r}"
            )
        qid = qid.strip()
        if qid in seen:
            raise CorpusFormatError(f"topics line {number}: duplicate query id {qid!r}")
        seen.add(qid)
        topics.append((qid, text.strip()))
    return topics


def filter_policy(config: Config) -> FilterPolicy:
    return FilterPolicy(
        drop_stopwords=config.filter_stopwords,
        min_length=config.filter_min_length,
        drop_digits=config.filter_digits,
    )


def make_tag(method: str, config: Config) -> str:
    """Method name plus a short hash of every ranking-relevant parameter."""
    if config.tag:
        return config.tag
    relevant = {
        "stemmer": config.stemmer,
        "b": config.b,
        "k1": config.k1,
        "mu": config.mu,
        "k": config.k,
        "fb_docs": config.fb_docs,
        "fb_terms": config.fb_terms,
        "fb_lambda": config.fb_lambda,
        "filter_stopwords": config.filter_stopwords,
        "filter_min_length": config.filter_min_length,
        "filter_digits": config.filter_digits,
        "provider": config.provider,
        "dim": config.dim,
        "radius": config.radius,
        "embed_seed": config.embed_seed,
        "max_pieces": config.max_pieces,
        "static_scope": config.static_scope,
    }
    blob = json.dumps(relevant, sort_keys=True).encode("utf-8")
    return f"{method}-{hashlib.md5(blob).hexdigest()[:8]}"


def build_provider(config: Config) -> EmbeddingProvider:
    if config.provider == "deterministic-test":
        return DeterministicTestProvider(
            dim=config.dim, radius=config.radius, seed=config.embed_seed
        )
    if config.provider == "remote":
        url = config.require("remote_url", hint="the extractor serve endpoint")
        return RemoteProvider(url, timeout=config.remote_timeout)
    raise ConfigurationError(
        f"provider {config.provider!r} cannot embed queries in-process; {QUERY_EMBED_HINT}"
    )


def write_query_embeddings(
    stream: TextIO, embeddings: Mapping[str, QueryEmbedding], dim: int
) -> None:
    payload = {
        "dim": dim,
        "queries": {
            qid: {
                "centroid": [float(x) for x in emb.centroid],
                "per_term": {
                    stem: [float(x) for x in vec] for stem, vec in emb.per_term.items()
                },
            }
            for qid, emb in embeddings.items()
        },
    }
    json.dump(payload, stream, sort_keys=True)
    stream.write("\n")


def load_query_embeddings(source: Source) -> tuple[dict[str, QueryEmbedding], int]:
    payload = json.loads(_as_text(source))
    dim = int(payload["dim"])
    out: dict[str, QueryEmbedding] = {}
    for qid, entry in payload["queries"].items():
        centroid = np.asarray(entry["centroid"], dtype=float)
        per_term = {
            stem: np.asarray(vec, dtype=float) for stem, vec in entry["per_term"].items()
        }
        if len(centroid) != dim or any(len(v) != dim for v in per_term.values()):
            raise CorpusFormatError(f"query {qid!r}: vector dimension != {dim}")
        out[qid] = QueryEmbedding(query_id=qid, centroid=centroid, per_term=per_term)
    return out, dim


def _needs_store(method: str) -> bool:
    return method.startswith("ceqe-")


def _needs_static(method: str) -> bool:
    return method in ("static", "static-prf")


@dataclass
class Pipeline:
    """Everything one method needs to rank topics, loaded once."""

    config: Config
    index: Index
    store: MentionStore | None = None
    static_vectors: dict[str, np.ndarray] | None = None
    provider: EmbeddingProvider | None = None
    precomputed_queries: dict[str, QueryEmbedding] | None = None
    documents: list[Document] | None = None
    warnings: list[str] = field(default_factory=list)

    @classmethod
    def prepare(cls, config: Config, method: str) -> "Pipeline":
        if method not in METHODS:
            raise ConfigurationError(
                f"unknown method {method!r}; expected one of {', '.join(METHODS)}"
            )
        resolve_stemmer(config.stemmer)
        pipeline = cls(config=config, index=_load_index(config))
        if _needs_static(method):
            pipeline.static_vectors = load_static_vectors(
                str(config.require_path("static_vectors"))
            )
        if _needs_store(method):
            _attach_embeddings(pipeline)
        return pipeline

    def query_embedding(self, query_id: str, tokens: Sequence[Token]) -> QueryEmbedding:
        if self.precomputed_queries is not None:
            emb = self.precomputed_queries.get(query_id)
            if emb is None:
                raise ConfigurationError(
                    f"query {query_id!r} missing from {self.config.query_embeddings}; "
                    + QUERY_EMBED_HINT
                )
            return emb
        assert self.provider is not None
        return embed_query(tokens, self.provider, query_id=query_id)


def _load_index(config: Config) -> Index:
    if config.index:
        return Index.load(config.require_path("index", hint="run `ceqe index` first"))
    corpus = config.require_path(
        "corpus", hint="set either an index file or a corpus to index in memory"
    )
    return Index.build(_read_corpus(config, corpus))


def _read_corpus(config: Config, path) -> list[Document]:
    with open(path, "rb") as handle:
        return ingest_auto(handle.read(), STOPWORDS, config.stemmer)


def _attach_embeddings(pipeline: Pipeline) -> None:
    """Wire up the mention store and query-embedding source for CEQE."""
    config = pipeline.config
    if config.store:
        store_path = config.require_path("store", hint=EXTRACTOR_HINT)
        pipeline.store = MentionStore.open(store_path, warnings=pipeline.warnings)
    elif config.provider == "deterministic-test":
        corpus = config.require_path("corpus", hint=EXTRACTOR_HINT)
        provider = build_provider(config)
        pipeline.store = build_mention_store(
            _read_corpus(config, corpus),
            provider,
            max_pieces=config.max_pieces,
            warnings=pipeline.warnings,
        )
        pipeline.provider = provider
        return
    else:
        raise ConfigurationError(f"CEQE methods need a mention store; {EXTRACTOR_HINT}")
    if config.provider == "precomputed":
        source = config.require_path("query_embeddings", hint=QUERY_EMBED_HINT)
        embeddings, dim = load_query_embeddings(source)
        if dim != pipeline.store.dim:
            raise ConfigurationError(
                f"query embedding dim {dim} != mention store dim {pipeline.store.dim}"
            )
        pipeline.precomputed_queries = embeddings
    else:
        pipeline.provider = build_provider(config)


def expansion_model(
    pipeline: Pipeline,
    method: str,
    query_id: str,
    tokens: Sequence[Token],
    first_pass: Ranking,
    warnings: list[str] | None = None,
) -> TermDistribution:
    """The pre-interpolation term distribution for one expansion method."""
    config = pipeline.config
    policy = filter_policy(config)
    if method == "static":
        dist = static_embed_expand(
            tokens, pipeline.static_vectors, config.fb_terms, "global", policy=policy
        )
        return TermDistribution(query_id=query_id, weights=dist.weights)
    feedback = compute_posteriors(
        first_pass, tokens, config.fb_docs, pipeline.index, config.mu, warnings
    )
    if method == "rm3":
        return rm_expand(feedback, pipeline.index, config.fb_terms, policy)
    if method == "static-prf":
        return static_embed_expand(
            tokens,
            pipeline.static_vectors,
            config.fb_terms,
            "prf",
            feedback=feedback,
            index=pipeline.index,
            policy=policy,
        )
    query_emb = pipeline.query_embedding(query_id, tokens)
    if method == "ceqe-centroid":
        return ceqe_centroid(
            feedback, query_emb, pipeline.store, config.fb_terms, policy,
            warnings=warnings,
        )
    pooling = "max" if method == "ceqe-max" else "prod"
    return ceqe_term_pool(
        feedback, query_emb, pipeline.store, pooling, config.fb_terms, policy,
        warnings=warnings,
    )


def _bare_query_ranking(
    pipeline: Pipeline, query_id: str, tokens: Sequence[Token]
) -> Ranking:
    model = TermDistribution(query_id=query_id, weights=query_mle(tokens))
    return execute_expanded(
        pipeline.index, model, pipeline.config.k, pipeline.config.mu, query_id=query_id
    )


def _rank_one(
    pipeline: Pipeline,
    method: str,
    query_id: str,
    tokens: Sequence[Token],
    warnings: list[str],
) -> Ranking | None:
    config = pipeline.config
    if not any(not t.is_stopword for t in tokens):
        warnings.append(f"query {query_id!r}: no non-stopword terms, skipped")
        return None
    if method == "bm25":
        return bm25_search(
            pipeline.index, tokens, config.k, b=config.b, k1=config.k1, query_id=query_id
        )
    first_pass = bm25_search(
        pipeline.index, tokens, config.fb_docs, b=config.b, k1=config.k1,
        query_id=query_id,
    )
    if method != "static" and not first_pass.entries:
        warnings.append(
            f"query {query_id!r}: empty first pass, ranked with the unexpanded query"
        )
        return _bare_query_ranking(pipeline, query_id, tokens)
    try:
        model = expansion_model(pipeline, method, query_id, tokens, first_pass, warnings)
    except ValueError as exc:
        warnings.append(
            f"query {query_id!r}: expansion failed ({exc}); "
            "ranked with the unexpanded query"
        )
        return _bare_query_ranking(pipeline, query_id, tokens)
    expanded = interpolate(tokens, model, config.fb_lambda)
    return execute_expanded(
        pipeline.index, expanded, config.k, config.mu, query_id=query_id
    )


def run_queries(
    pipeline: Pipeline,
    topics: Sequence[tuple[str, str]],
    method: str,
    warnings: list[str] | None = None,
) -> dict[str, Ranking]:
    """Rank every topic, in topic order. Unrankable queries are skipped
    with a warning; failed expansions fall back to the unexpanded query so
    the run stays complete."""
    if warnings is None:
        warnings = pipeline.warnings
    rankings: dict[str, Ranking] = {}
    for query_id, text in topics:
        tokens = tokenize(text, stemmer_id=pipeline.config.stemmer)
        ranking = _rank_one(pipeline, method, query_id, tokens, warnings)
        if ranking is not None:
            rankings[query_id] = ranking
    return rankings
