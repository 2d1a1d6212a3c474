"""Intrinsic expansion-term utility: one-term expansion recall deltas.

A candidate term is judged by adding it alone to the query with the default
feedback weight and measuring the change in Recall@1000. Terms are good,
bad, or neutral by a strict threshold on that delta; methods are then scored
by the fraction of their top-ranked terms judged good.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .evaluation import recall_at
from .expansion import TermDistribution, execute_expanded, interpolate, query_mle
from .index import Index
from .text import Token

__all__ = [
    "TermLabel",
    "IntrinsicReport",
    "intrinsic_label",
    "label_candidates",
    "intrinsic_precision",
]

DELTA_THRESHOLD = 0.001
DEFAULT_TERM_WEIGHT = 0.5


@dataclass(frozen=True)
class TermLabel:
    query_id: str
    stem: str
    delta_recall1000: float
    label: str

    @staticmethod
    def from_delta(query_id: str, stem: str, delta: float, threshold: float) -> "TermLabel":
        if delta > threshold:
            label = "positive"
        elif delta < -threshold:
            label = "negative"
        else:
            label = "neutral"
        return TermLabel(query_id=query_id, stem=stem, delta_recall1000=delta, label=label)


def _base_recall(
    index: Index,
    query_tokens: Sequence[Token],
    qrels_for_query: Mapping[str, int],
    query_id: str,
    mu: float,
    cutoff: int,
) -> float | None:
    model = TermDistribution(query_id=query_id, weights=query_mle(query_tokens))
    ranking = execute_expanded(index, model, cutoff, mu, query_id=query_id)
    return recall_at(ranking, qrels_for_query, cutoff)


def intrinsic_label(
    index: Index,
    query_tokens: Sequence[Token],
    stem: str,
    qrels_for_query: Mapping[str, int],
    query_id: str = "",
    mu: float = 1500.0,
    cutoff: int = 1000,
    term_weight: float = DEFAULT_TERM_WEIGHT,
    threshold: float = DELTA_THRESHOLD,
) -> TermLabel | None:
    """Label one candidate stem; None when the query has no relevant docs.

    The expanded model interpolates the query MLE with a point mass on the
    stem at the default feedback weight. The threshold is strict in both
    directions, so a delta of exactly +/- threshold stays neutral.
    """
    if stem not in index.collection_frequency:
        raise ValueError(f"stem {stem!r} not in the index vocabulary")
    base = _base_recall(index, query_tokens, qrels_for_query, query_id, mu, cutoff)
    if base is None:
        return None
    return _label_with_base(
        index, query_tokens, stem, qrels_for_query, query_id, mu, cutoff,
        term_weight, threshold, base,
    )


def _label_with_base(
    index: Index,
    query_tokens: Sequence[Token],
    stem: str,
    qrels_for_query: Mapping[str, int],
    query_id: str,
    mu: float,
    cutoff: int,
    term_weight: float,
    threshold: float,
    base_recall: float,
) -> TermLabel:
    point_mass = TermDistribution(query_id=query_id, weights={stem: 1.0})
    expanded_model = interpolate(query_tokens, point_mass, term_weight)
    ranking = execute_expanded(index, expanded_model, cutoff, mu, query_id=query_id)
    expanded = recall_at(ranking, qrels_for_query, cutoff)
    delta = (expanded or 0.0) - base_recall
    return TermLabel.from_delta(query_id, stem, delta, threshold)


def label_candidates(
    index: Index,
    query_tokens: Sequence[Token],
    stems: Sequence[str],
    qrels_for_query: Mapping[str, int],
    query_id: str = "",
    mu: float = 1500.0,
    cutoff: int = 1000,
    term_weight: float = DEFAULT_TERM_WEIGHT,
    threshold: float = DELTA_THRESHOLD,
) -> list[TermLabel]:
    """Label a candidate pool, computing the unexpanded baseline once.

    Returns an empty list when the query has no relevant docs (such queries
    are excluded from the intrinsic evaluation entirely).
    """
    base = _base_recall(index, query_tokens, qrels_for_query, query_id, mu, cutoff)
    if base is None:
        return []
    labels = []
    for stem in stems:
        if stem not in index.collection_frequency:
            raise ValueError(f"stem {stem!r} not in the index vocabulary")
        labels.append(
            _label_with_base(
                index, query_tokens, stem, qrels_for_query, query_id, mu,
                cutoff, term_weight, threshold, base,
            )
        )
    return labels


@dataclass
class IntrinsicReport:
    value: float
    per_query: dict[str, float]
    unjudged: dict[str, list[str]] = field(default_factory=dict)
    excluded_queries: list[str] = field(default_factory=list)


def intrinsic_precision(
    method_term_ranking: Mapping[str, Sequence[str]],
    labels: Mapping[str, Mapping[str, str]],
    k: int,
) -> IntrinsicReport:
    """Fraction of a method's top-k terms labeled positive, macro-averaged.

    Only queries with at least one positive label participate. A ranked
    term without a label counts as non-positive and is recorded as
    unjudged.
    """
    per_query: dict[str, float] = {}
    unjudged: dict[str, list[str]] = {}
    excluded: list[str] = []
    for qid in sorted(labels):
        query_labels = labels[qid]
        if not any(label == "positive" for label in query_labels.values()):
            excluded.append(qid)
            continue
        top = list(method_term_ranking.get(qid, ()))[:k]
        positives = 0
        for stem in top:
            label = query_labels.get(stem)
            if label is None:
                unjudged.setdefault(qid, []).append(stem)
            elif label == "positive":
                positives += 1
        per_query[qid] = positives / k
    value = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return IntrinsicReport(
        value=value,
        per_query=per_query,
        unjudged=unjudged,
        excluded_queries=excluded,
    )
