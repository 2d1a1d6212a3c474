"""TREC qrels/run interchange, ranking metrics, and significance testing."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO, Union

from scipy import stats

from .errors import RunFormatError
from .index import Ranking

__all__ = [
    "Qrels",
    "parse_qrels",
    "write_qrels",
    "parse_run",
    "write_run",
    "average_precision",
    "ndcg",
    "precision_at",
    "recall_at",
    "MetricReport",
    "evaluate_run",
    "TTestResult",
    "paired_t_test",
]

# query_id -> {doc_id -> grade}; unjudged pairs are absent and count as grade 0.
Qrels = dict[str, dict[str, int]]

Source = Union[str, bytes, Path, TextIO]


def _as_text(source: Source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if hasattr(source, "read"):
        return source.read()
    return source


def parse_qrels(source: Source) -> Qrels:
    """Lines `qid 0 docid grade`, whitespace-separated."""
    qrels: Qrels = {}
    for number, line in enumerate(_as_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise RunFormatError(f"qrels line {number}: expected 4 fields, got {len(parts)}")
        qid, _, doc_id, grade = parts
        try:
            qrels.setdefault(qid, {})[doc_id] = int(grade)
        except ValueError:
            raise RunFormatError(f"qrels line {number}: grade {grade!r} not an integer") from None
    return qrels


def write_qrels(stream: TextIO, qrels: Qrels) -> None:
    for qid in qrels:
        for doc_id, grade in qrels[qid].items():
            stream.write(f"{qid} 0 {doc_id} {grade}\n")


def parse_run(source: Source) -> tuple[dict[str, Ranking], str]:
    """Lines `qid Q0 docid rank score tag`; ranks must run 1..n per query."""
    rankings: dict[str, list[tuple[str, float]]] = {}
    expected_rank: dict[str, int] = {}
    tag = ""
    for number, line in enumerate(_as_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise RunFormatError(f"run line {number}: expected 6 fields, got {len(parts)}")
        qid, q0, doc_id, rank_s, score_s, line_tag = parts
        if q0 != "Q0":
            raise RunFormatError(f"run line {number}: second field must be Q0")
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise RunFormatError(f"run line {number}: bad rank or score") from None
        nxt = expected_rank.get(qid, 1)
        if rank != nxt:
            raise RunFormatError(
                f"run line {number}: rank {rank} for query {qid!r}, expected {nxt}"
            )
        expected_rank[qid] = nxt + 1
        rankings.setdefault(qid, []).append((doc_id, score))
        tag = line_tag
    return (
        {qid: Ranking(query_id=qid, entries=tuple(entries)) for qid, entries in rankings.items()},
        tag,
    )


def write_run(
    stream: TextIO,
    rankings: Iterable[Ranking],
    tag: str,
) -> None:
    """Scores fixed to 6 decimal places; ranks 1-based in entry order."""
    for ranking in rankings:
        for rank, (doc_id, score) in enumerate(ranking.entries, start=1):
            stream.write(
                f"{ranking.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n"
            )


def _relevant_set(qrels_for_query: Mapping[str, int]) -> set[str]:
    return {doc_id for doc_id, grade in qrels_for_query.items() if grade >= 1}


def average_precision(
    ranking: Ranking,
    qrels_for_query: Mapping[str, int],
    cutoff: int = 1000,
) -> float | None:
    """AP over the top cutoff; None when the query has no relevant docs."""
    relevant = _relevant_set(qrels_for_query)
    if not relevant:
        return None
    hits = 0
    total = 0.0
    for i, (doc_id, _) in enumerate(ranking.entries[:cutoff], start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def ndcg(ranking: Ranking, qrels_for_query: Mapping[str, int], k: int) -> float:
    """Exponential-gain NDCG: (2^grade - 1) / log2(rank + 1)."""
    dcg = 0.0
    for i, (doc_id, _) in enumerate(ranking.entries[:k], start=1):
        grade = qrels_for_query.get(doc_id, 0)
        dcg += (2.0 ** grade - 1.0) / math.log2(i + 1)
    ideal = sorted(qrels_for_query.values(), reverse=True)[:k]
    idcg = sum(
        (2.0 ** grade - 1.0) / math.log2(i + 1) for i, grade in enumerate(ideal, start=1)
    )
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def precision_at(ranking: Ranking, qrels_for_query: Mapping[str, int], k: int) -> float:
    relevant = _relevant_set(qrels_for_query)
    hits = sum(1 for doc_id, _ in ranking.entries[:k] if doc_id in relevant)
    return hits / k


def recall_at(
    ranking: Ranking,
    qrels_for_query: Mapping[str, int],
    k: int,
) -> float | None:
    """None when the query has no relevant docs (recall undefined)."""
    relevant = _relevant_set(qrels_for_query)
    if not relevant:
        return None
    hits = sum(1 for doc_id, _ in ranking.entries[:k] if doc_id in relevant)
    return hits / len(relevant)


@dataclass
class MetricReport:
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]
    excluded: dict[str, list[str]] = field(default_factory=dict)

    def to_tsv(self) -> str:
        metrics = list(self.means)
        lines = ["\t".join(["query", *metrics])]
        for qid in self.per_query:
            row = [qid]
            for metric in metrics:
                value = self.per_query[qid].get(metric)
                row.append("-" if value is None else f"{value:.6f}")
            lines.append("\t".join(row))
        lines.append("\t".join(["all", *(f"{self.means[m]:.6f}" for m in metrics)]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_query": self.per_query,
                "means": self.means,
                "excluded": self.excluded,
            },
            indent=2,
            sort_keys=True,
        )


DEFAULT_METRICS = (
    "map",
    "p@10",
    "p@20",
    "ndcg@10",
    "ndcg@20",
    "recall@100",
    "recall@1000",
)


def evaluate_run(
    rankings: Mapping[str, Ranking],
    qrels: Qrels,
    metrics: Sequence[str] = DEFAULT_METRICS,
    warnings: list[str] | None = None,
) -> MetricReport:
    """Per-query metrics plus arithmetic means over the evaluated queries.

    Queries present in only one of run/qrels are reported as orphans;
    queries where a metric is undefined (no relevant docs) are excluded
    from that metric's mean and listed in the report.
    """
    if warnings is not None:
        run_only = sorted(set(rankings) - set(qrels))
        qrels_only = sorted(set(qrels) - set(rankings))
        if run_only:
            warnings.append(f"queries in run but not qrels: {', '.join(run_only)}")
        if qrels_only:
            warnings.append(f"queries in qrels but not run: {', '.join(qrels_only)}")
    per_query: dict[str, dict[str, float]] = {}
    excluded: dict[str, list[str]] = {m: [] for m in metrics}
    for qid in sorted(set(rankings) & set(qrels)):
        ranking = rankings[qid]
        judged = qrels[qid]
        row: dict[str, float] = {}
        for metric in metrics:
            value = _compute_metric(metric, ranking, judged)
            if value is None:
                excluded[metric].append(qid)
            row[metric] = value
        per_query[qid] = row
    means = {}
    for metric in metrics:
        values = [
            row[metric] for row in per_query.values() if row.get(metric) is not None
        ]
        means[metric] = sum(values) / len(values) if values else 0.0
    return MetricReport(
        per_query=per_query,
        means=means,
        excluded={m: qids for m, qids in excluded.items() if qids},
    )


def _compute_metric(metric: str, ranking: Ranking, judged: Mapping[str, int]):
    name, _, arg = metric.partition("@")
    if name == "map":
        return average_precision(ranking, judged, cutoff=int(arg) if arg else 1000)
    if name == "p":
        return precision_at(ranking, judged, int(arg))
    if name == "ndcg":
        return ndcg(ranking, judged, int(arg))
    if name == "recall":
        return recall_at(ranking, judged, int(arg))
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    degenerate: bool = False


def paired_t_test(
    per_query_a: Sequence[float],
    per_query_b: Sequence[float],
) -> TTestResult:
    """Two-sided paired t-test with n-1 degrees of freedom.

    Zero-variance differences are degenerate: p = 1 when every difference
    is 0, otherwise the p -> 0 limit applies.
    """
    if len(per_query_a) != len(per_query_b):
        raise ValueError("paired samples differ in length")
    n = len(per_query_a)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    diffs = [a - b for a, b in zip(per_query_a, per_query_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, degenerate=True)
        return TTestResult(t=math.copysign(math.inf, mean), p=0.0, degenerate=True)
    t = mean / math.sqrt(var / n)
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return TTestResult(t=t, p=p)
