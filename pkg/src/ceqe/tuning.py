"""Cross-validated grid search over expansion parameters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .evaluation import Source, _as_text

__all__ = [
    "GridPoint",
    "CVResult",
    "default_grid",
    "assign_folds",
    "parse_folds",
    "write_folds",
    "grid_search_cv",
]

# One grid point, e.g. {"fb_docs": 10, "fb_terms": 20, "lam": 0.5}.
GridPoint = dict[str, object]


def default_grid() -> list[GridPoint]:
    """Full tuning ranges: docs {5..100 by 5}, terms {10..100 by 10},
    interpolation {0.10..0.90 by 0.05}."""
    lambdas = [round(0.10 + 0.05 * i, 2) for i in range(17)]
    return [
        {"fb_docs": d, "fb_terms": t, "lam": lam}
        for d in range(5, 101, 5)
        for t in range(10, 101, 10)
        for lam in lambdas
    ]


def assign_folds(topics: Sequence[str], folds: int, seed: int) -> dict[str, int]:
    """Seeded random partition into near-equal folds."""
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    ordered = sorted(topics)
    rng = np.random.default_rng(seed)
    rng.shuffle(ordered)
    return {qid: i % folds for i, qid in enumerate(ordered)}


def parse_folds(source: Source) -> dict[str, int]:
    """External split file: lines `fold_index<TAB>query_id`."""
    assignments: dict[str, int] = {}
    for number, line in enumerate(_as_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        fold_s, _, qid = line.partition("\t")
        try:
            fold = int(fold_s)
        except ValueError:
            raise ValueError(f"folds line {number}: bad fold index {fold_s!r}") from None
        if not qid:
            raise ValueError(f"folds line {number}: missing query id")
        assignments[qid] = fold
    return assignments


def write_folds(stream, assignments: Mapping[str, int]) -> None:
    for qid in sorted(assignments):
        stream.write(f"{assignments[qid]}\t{qid}\n")


@dataclass
class CVResult:
    fold_params: dict[int, GridPoint]
    fold_topics: dict[int, list[str]]
    pooled: dict[str, float]
    mean: float


def grid_search_cv(
    topics: Sequence[str],
    evaluate: Callable[[GridPoint], Mapping[str, float | None]],
    grid: Sequence[GridPoint],
    folds: int = 5,
    seed: int = 0,
    fold_assignments: Mapping[str, int] | None = None,
) -> CVResult:
    """Select parameters per fold on the training topics only.

    evaluate(point) returns the target metric per query (None where the
    metric is undefined); it is called once per grid point for all topics,
    since per-query values are independent of the fold structure. For each
    fold the point with the best training mean wins, ties going to the
    earlier grid point; held-out values under the winning point are pooled
    into the final per-query report.
    """
    if not grid:
        raise ValueError("empty parameter grid")
    if not topics:
        raise ValueError("no topics to tune on")
    if fold_assignments is None:
        fold_assignments = assign_folds(topics, folds, seed)
    else:
        missing = sorted(set(topics) - set(fold_assignments))
        if missing:
            raise ValueError(f"topics without fold assignment: {', '.join(missing)}")
    by_fold: dict[int, list[str]] = {}
    for qid in sorted(topics):
        by_fold.setdefault(fold_assignments[qid], []).append(qid)

    cache: list[Mapping[str, float | None]] = [evaluate(point) for point in grid]

    fold_params: dict[int, GridPoint] = {}
    pooled: dict[str, float] = {}
    for fold in sorted(by_fold):
        test_topics = by_fold[fold]
        train_topics = [q for q in sorted(topics) if fold_assignments[q] != fold]
        best_index: int | None = None
        best_score = -np.inf
        for i, values in enumerate(cache):
            train_values = [
                values[q] for q in train_topics if values.get(q) is not None
            ]
            if not train_values:
                continue
            score = sum(train_values) / len(train_values)
            if score > best_score:
                best_score = score
                best_index = i
        if best_index is None:
            raise ValueError(f"fold {fold}: zero evaluable training queries")
        fold_params[fold] = grid[best_index]
        test_values = {
            q: cache[best_index][q]
            for q in test_topics
            if cache[best_index].get(q) is not None
        }
        if not test_values:
            raise ValueError(f"fold {fold}: zero evaluable held-out queries")
        pooled.update(test_values)
    mean = sum(pooled.values()) / len(pooled)
    return CVResult(
        fold_params=fold_params,
        fold_topics={fold: list(qids) for fold, qids in by_fold.items()},
        pooled=pooled,
        mean=mean,
    )
