"""Expansion-term models: relevance model, static-embedding, and CEQE variants.

All models produce a TermDistribution over candidate stems mined from the
pseudo-relevant documents. The relevance model weighs candidates by their
smoothed document frequencies; the CEQE variants replace those counts with
similarities between per-mention contextualized vectors and a query
representation, so the same surface form contributes differently depending
on the contexts it occurs in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .embed.query import QueryEmbedding
from .embed.store import MentionStore
from .errors import CorpusFormatError
from .index import Index, Ranking, rank_entries, ql_log_score
from .text import STOPWORDS, Token

__all__ = [
    "FilterPolicy",
    "DEFAULT_FILTER",
    "FeedbackSet",
    "TermDistribution",
    "ExpansionParams",
    "candidate_filter",
    "compute_posteriors",
    "rm_expand",
    "ceqe_centroid",
    "ceqe_term_pool",
    "centroid_doc_distribution",
    "pooled_doc_distribution",
    "static_embed_expand",
    "load_static_vectors",
    "query_mle",
    "interpolate",
    "execute_expanded",
    "write_term_distribution",
    "read_term_distribution",
]

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class FilterPolicy:
    """Candidate-term admission rules applied to every expansion model."""

    drop_stopwords: bool = True
    min_length: int = 2
    drop_digits: bool = True


DEFAULT_FILTER = FilterPolicy()


@dataclass(frozen=True)
class FeedbackSet:
    """Top feedback documents with QL log scores and softmax posteriors."""

    query_id: str
    docs: tuple[tuple[str, float, float], ...]

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _, _ in self.docs]


@dataclass(frozen=True)
class TermDistribution:
    query_id: str
    weights: dict[str, float]

    def top(self, k: int) -> list[tuple[str, float]]:
        return sorted(self.weights.items(), key=lambda e: (-e[1], e[0]))[:k]


@dataclass(frozen=True)
class ExpansionParams:
    fb_docs: int = 10
    fb_terms: int = 20
    lam: float = 0.5
    similarity: str = "cosine-shifted"
    pooling: str = "centroid"

    def __post_init__(self) -> None:
        if self.fb_docs < 1:
            raise ValueError(f"fb_docs must be >= 1, got {self.fb_docs}")
        if self.fb_terms < 1:
            raise ValueError(f"fb_terms must be >= 1, got {self.fb_terms}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.similarity != "cosine-shifted":
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if self.pooling not in ("centroid", "max", "prod"):
            raise ValueError(f"unknown pooling {self.pooling!r}")


def candidate_filter(
    stems: Iterable[str],
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
) -> list[str]:
    """Order-preserving application of the admission rules."""
    out = []
    for stem in stems:
        if policy.drop_stopwords and stem in stopword_list:
            continue
        if len(stem) < policy.min_length:
            continue
        if policy.drop_digits and stem.isdigit():
            continue
        out.append(stem)
    return out


def shifted_cosine(x: np.ndarray, y: np.ndarray) -> float:
    """delta(x, y) = (1 + cos(x, y)) / 2, mapped into [0, 1].

    Raw cosine can be negative, which would break the probability
    construction of the mention-normalized distributions; the shift keeps
    the cosine ordering while guaranteeing positive mass.
    """
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 0.5
    return 0.5 * (1.0 + float(np.dot(x, y)) / (nx * ny))


def _delta_sum(rows: np.ndarray, q: np.ndarray, q_norm: float) -> float:
    """Sum of shifted cosines between q and each row."""
    if len(rows) == 0:
        return 0.0
    rows64 = rows.astype(np.float64, copy=False)
    norms = np.linalg.norm(rows64, axis=1)
    safe = norms > 0.0
    cos = np.zeros(len(rows64))
    if q_norm > 0.0:
        cos[safe] = (rows64[safe] @ q) / (norms[safe] * q_norm)
    return float(np.sum(0.5 * (1.0 + cos)))


def compute_posteriors(
    ranking: Ranking,
    query_tokens: Sequence[Token],
    fb_docs: int,
    index: Index,
    mu: float = 1500.0,
    warnings: list[str] | None = None,
) -> FeedbackSet:
    """Score the top fb_docs of the first pass and softmax into posteriors.

    s_i is the Dirichlet QL log score of the query against feedback doc i;
    posterior_i = exp(s_i - max_j s_j) / sum_j exp(s_j - max_j s_j). The
    uniform document prior is absorbed by the normalization. A ranking
    shorter than fb_docs is used as-is with a warning.
    """
    if not ranking.entries:
        raise ValueError("empty ranking: no feedback documents available")
    if fb_docs < 1:
        raise ValueError(f"fb_docs must be >= 1, got {fb_docs}")
    take = ranking.entries[:fb_docs]
    if len(take) < fb_docs and warnings is not None:
        warnings.append(
            f"query {ranking.query_id!r}: only {len(take)} of {fb_docs} feedback docs"
        )
    scores = [
        ql_log_score(index, query_tokens, doc_id, mu) for doc_id, _ in take
    ]
    peak = max(scores)
    shifted = [math.exp(s - peak) for s in scores]
    z = sum(shifted)
    return FeedbackSet(
        query_id=ranking.query_id,
        docs=tuple(
            (doc_id, score, weight / z)
            for (doc_id, _), score, weight in zip(take, scores, shifted)
        ),
    )


def _finalize(
    query_id: str,
    weights: dict[str, float],
    fb_terms: int,
) -> TermDistribution:
    """Keep the top fb_terms by weight (ties by ascending stem), renormalize.

    Zero-mass terms are dropped first so they never occupy a selection slot.
    """
    positive = [(stem, w) for stem, w in weights.items() if w > 0.0]
    kept = sorted(positive, key=lambda e: (-e[1], e[0]))[:fb_terms]
    total = sum(w for _, w in kept)
    if total <= 0.0:
        raise ValueError("expansion produced no positive term weights")
    return TermDistribution(
        query_id=query_id, weights={stem: w / total for stem, w in kept}
    )


def rm_expand(
    feedback: FeedbackSet,
    index: Index,
    fb_terms: int,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
) -> TermDistribution:
    """Relevance model: p(w|R) proportional to sum_D p_MLE(w|D) p(D|Q).

    Candidates are the filtered stems of the feedback documents; the MLE
    denominator stays the full non-stopword document length, so filtering
    changes which terms may be selected but not their document probabilities.
    """
    weights: dict[str, float] = {}
    for doc_id, _, posterior in feedback.docs:
        doc_len = index.doc_lengths.get(doc_id)
        if doc_len is None or doc_len == 0:
            continue
        terms = index.doc_terms[doc_id]
        admitted = set(
            candidate_filter((stem for stem, _ in terms), policy, stopword_list)
        )
        for stem, tf in terms:
            if stem in admitted:
                weights[stem] = weights.get(stem, 0.0) + posterior * (tf / doc_len)
    if not weights:
        raise ValueError(f"no candidate terms survived the filters {policy}")
    return _finalize(feedback.query_id, weights, fb_terms)


def centroid_doc_distribution(
    store: MentionStore,
    doc_id: str,
    centroid: np.ndarray,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
) -> dict[str, float]:
    """Mention-normalized distribution p(w|Q, D) for one document.

    p(w|Q,D) = sum_{m in M_w} delta(Q, m) / sum_{m in M_*} delta(Q, m),
    where M_* ranges over mentions of the document's admitted candidates.
    Returns an empty dict when the document has no admitted mention mass.
    """
    centroid = np.asarray(centroid, dtype=float)
    q_norm = float(np.linalg.norm(centroid))
    masses: dict[str, float] = {}
    total = 0.0
    for stem in candidate_filter(store.doc_stems(doc_id), policy, stopword_list):
        mass = _delta_sum(store.mention_vectors(doc_id, stem), centroid, q_norm)
        masses[stem] = mass
        total += mass
    if total <= 0.0:
        return {}
    return {stem: mass / total for stem, mass in masses.items()}


def ceqe_centroid(
    feedback: FeedbackSet,
    query_emb: QueryEmbedding,
    store: MentionStore,
    fb_terms: int,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
    warnings: list[str] | None = None,
) -> TermDistribution:
    """CEQE with the query centroid representation.

    Per-document distributions from centroid_doc_distribution are mixed by
    the feedback posteriors; documents with no admitted mention mass are
    skipped with a warning.
    """
    weights: dict[str, float] = {}
    for doc_id, _, posterior in feedback.docs:
        dist = centroid_doc_distribution(store, doc_id, query_emb.centroid, policy, stopword_list)
        if not dist:
            if warnings is not None:
                warnings.append(f"doc {doc_id!r}: no admitted mention mass, skipped")
            continue
        for stem, p in dist.items():
            weights[stem] = weights.get(stem, 0.0) + posterior * p
    if not weights:
        raise ValueError(f"no candidate terms survived the filters {policy}")
    return _finalize(feedback.query_id, weights, fb_terms)


def pooled_doc_distribution(
    store: MentionStore,
    doc_id: str,
    per_term: Mapping[str, np.ndarray],
    pooling: str,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
    warnings: list[str] | None = None,
) -> dict[str, float]:
    """Per-document distribution under per-query-term pooling.

    For each query term q, p(w|q,D) follows the same mention-normalized
    form as the centroid variant with the term vector in place of the
    centroid. MaxPool takes max_q log p(w|q,D); MulPool sums the logs
    (the product in log space). Zero probabilities are floored at 1e-12
    before the log. Document-level normalization Z' is a log-sum-exp over
    the admitted candidates, so both poolings share one code path and a
    single-term query reduces them to the identical distribution.
    """
    if pooling not in ("max", "prod"):
        raise ValueError(f"pooling must be 'max' or 'prod', got {pooling!r}")
    candidates = candidate_filter(store.doc_stems(doc_id), policy, stopword_list)
    if not candidates:
        return {}
    rows = {stem: store.mention_vectors(doc_id, stem) for stem in candidates}
    log_f: dict[str, float] = {stem: 0.0 for stem in candidates}
    first = True
    for q_stem in sorted(per_term):
        q_vec = np.asarray(per_term[q_stem], dtype=float)
        q_norm = float(np.linalg.norm(q_vec))
        masses = {
            stem: _delta_sum(rows[stem], q_vec, q_norm) for stem in candidates
        }
        denom = sum(masses.values())
        if denom <= 0.0:
            return {}
        for stem in candidates:
            p = masses[stem] / denom
            if p < PROB_FLOOR:
                if warnings is not None:
                    warnings.append(
                        f"doc {doc_id!r} term {stem!r}: p(w|q) floored at {PROB_FLOOR}"
                    )
                p = PROB_FLOOR
            log_p = math.log(p)
            if first:
                log_f[stem] = log_p
            elif pooling == "max":
                log_f[stem] = max(log_f[stem], log_p)
            else:
                log_f[stem] = log_f[stem] + log_p
        first = False
    if first:
        raise ValueError("per_term is empty: no non-stopword query terms")
    peak = max(log_f.values())
    z = peak + math.log(sum(math.exp(lf - peak) for lf in log_f.values()))
    return {stem: math.exp(lf - z) for stem, lf in log_f.items()}


def ceqe_term_pool(
    feedback: FeedbackSet,
    query_emb: QueryEmbedding,
    store: MentionStore,
    pooling: str,
    fb_terms: int,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
    warnings: list[str] | None = None,
) -> TermDistribution:
    """CEQE with per-term similarity pooling (MaxPool or MulPool)."""
    weights: dict[str, float] = {}
    for doc_id, _, posterior in feedback.docs:
        dist = pooled_doc_distribution(
            store, doc_id, query_emb.per_term, pooling, policy, stopword_list, warnings
        )
        if not dist:
            if warnings is not None:
                warnings.append(f"doc {doc_id!r}: no admitted mention mass, skipped")
            continue
        for stem, p in dist.items():
            weights[stem] = weights.get(stem, 0.0) + posterior * p
    if not weights:
        raise ValueError(f"no candidate terms survived the filters {policy}")
    return _finalize(feedback.query_id, weights, fb_terms)


def load_static_vectors(source: str | TextIO) -> dict[str, np.ndarray]:
    """Read a GloVe-style text table: one line per word, values after it."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 2:
            raise CorpusFormatError(f"static vector line {number}: no values")
        word = parts[0]
        try:
            vector = np.array([float(x) for x in parts[1:]], dtype=float)
        except ValueError:
            raise CorpusFormatError(
                f"static vector line {number}: non-numeric value"
            ) from None
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise CorpusFormatError(
                f"static vector line {number}: dimension {len(vector)} != {dim}"
            )
        table[word] = vector
    return table


def static_embed_expand(
    query_tokens: Sequence[Token],
    static_vectors: Mapping[str, np.ndarray],
    fb_terms: int,
    vocab_scope: str = "global",
    feedback: FeedbackSet | None = None,
    index: Index | None = None,
    policy: FilterPolicy = DEFAULT_FILTER,
    stopword_list: frozenset[str] = STOPWORDS,
) -> TermDistribution:
    """Expansion by similarity to the static (context-free) query centroid.

    Scope "global" scores every admitted term in the static table; scope
    "prf" restricts to terms occurring in the feedback documents, which
    requires the feedback set and the index it came from.
    """
    query_stems = [t.stem for t in query_tokens if not t.is_stopword]
    present = [static_vectors[s] for s in dict.fromkeys(query_stems) if s in static_vectors]
    if not present:
        raise ValueError("no query term found in the static vector table")
    centroid = np.mean(np.stack(present), axis=0)
    if vocab_scope == "global":
        vocabulary = sorted(static_vectors)
    elif vocab_scope == "prf":
        if feedback is None or index is None:
            raise ValueError("prf scope requires a feedback set and index")
        seen: set[str] = set()
        for doc_id in feedback.doc_ids():
            seen.update(stem for stem, _ in index.doc_terms.get(doc_id, ()))
        vocabulary = sorted(s for s in seen if s in static_vectors)
    else:
        raise ValueError(f"vocab_scope must be 'global' or 'prf', got {vocab_scope!r}")
    weights: dict[str, float] = {}
    for stem in candidate_filter(vocabulary, policy, stopword_list):
        weights[stem] = shifted_cosine(centroid, static_vectors[stem])
    if not weights:
        raise ValueError(f"no candidate terms survived the filters {policy}")
    query_id = feedback.query_id if feedback is not None else ""
    return _finalize(query_id, weights, fb_terms)


def query_mle(query_tokens: Sequence[Token]) -> dict[str, float]:
    """Maximum-likelihood stem distribution of the non-stopword query terms."""
    counts: dict[str, int] = {}
    for token in query_tokens:
        if token.is_stopword:
            continue
        counts[token.stem] = counts.get(token.stem, 0) + 1
    total = sum(counts.values())
    if total == 0:
        raise ValueError("query has no non-stopword terms")
    return {stem: n / total for stem, n in counts.items()}


def interpolate(
    original_query_tokens: Sequence[Token],
    expansion: TermDistribution,
    lam: float,
) -> TermDistribution:
    """RM3-style convex combination of the query MLE and the expansion model.

    p'(w) = (1 - lambda) * p_MLE(w|Q) + lambda * p_exp(w). The endpoints
    reproduce their inputs exactly; zero-weight terms are dropped.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    mle = query_mle(original_query_tokens)
    if lam == 0.0:
        return TermDistribution(query_id=expansion.query_id, weights=dict(mle))
    if lam == 1.0:
        return TermDistribution(
            query_id=expansion.query_id, weights=dict(expansion.weights)
        )
    combined: dict[str, float] = {}
    for stem in sorted(set(mle) | set(expansion.weights)):
        weight = (1.0 - lam) * mle.get(stem, 0.0) + lam * expansion.weights.get(stem, 0.0)
        if weight > 0.0:
            combined[stem] = weight
    return TermDistribution(query_id=expansion.query_id, weights=combined)


def execute_expanded(
    index: Index,
    model: TermDistribution,
    k: int,
    mu: float = 1500.0,
    query_id: str | None = None,
) -> Ranking:
    """Rank all documents by the weighted Dirichlet QL of the term model.

        score(D) = sum_w weight(w) * log[(tf(w,D) + mu p(w|C)) / (|D| + mu)]

    Evaluated as a per-document base (every term missing) plus posting-list
    adjustments, which is algebraically identical and touches only the
    postings of the model's terms.
    """
    if not model.weights:
        raise ValueError("empty term model")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = sorted((stem, w) for stem, w in model.weights.items() if w > 0.0)
    total_weight = sum(w for _, w in terms)
    base_const = sum(
        w * math.log(mu * index.background_probability(stem)) for stem, w in terms
    )
    scores: dict[str, float] = {}
    for doc_id, length in index.doc_lengths.items():
        scores[doc_id] = base_const - total_weight * math.log(length + mu)
    for stem, weight in terms:
        p_bg = index.background_probability(stem)
        for doc_id, tf in index.postings.get(stem, ()):
            scores[doc_id] += weight * math.log(1.0 + tf / (mu * p_bg))
    return Ranking(
        query_id=model.query_id if query_id is None else query_id,
        entries=rank_entries(scores.items(), k),
    )


def write_term_distribution(
    stream: TextIO,
    dist: TermDistribution,
    params: Mapping[str, object] | None = None,
) -> None:
    """Envelope line with query_id and params, then stem<TAB>weight lines
    sorted by descending weight (ties by ascending stem)."""
    import json

    envelope = {"query_id": dist.query_id, "params": dict(params or {})}
    stream.write(json.dumps(envelope, sort_keys=True) + "\n")
    for stem, weight in sorted(dist.weights.items(), key=lambda e: (-e[1], e[0])):
        stream.write(f"{stem}\t{weight!r}\n")


def read_term_distribution(stream: TextIO) -> tuple[TermDistribution, dict]:
    import json

    lines = stream.read().splitlines()
    if not lines:
        raise CorpusFormatError("empty term distribution file")
    envelope = json.loads(lines[0])
    weights: dict[str, float] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        stem, _, raw = line.partition("\t")
        weights[stem] = float(raw)
    return (
        TermDistribution(query_id=envelope.get("query_id", ""), weights=weights),
        envelope.get("params", {}),
    )
