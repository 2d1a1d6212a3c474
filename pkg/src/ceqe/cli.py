"""Command line: indexing, retrieval runs, evaluation, tuning, intrinsic.

Every command reads an optional `key = value` config file; flags override
file values. Warnings go to stderr and never change the exit code; errors
exit nonzero with a message.
"""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import click

from .config import Config, load_config
from .corpus import ingest_auto
from .errors import ConfigurationError, CorpusFormatError, RunFormatError
from .evaluation import DEFAULT_METRICS, evaluate_run, parse_qrels, parse_run, write_run
from .expansion import write_term_distribution
from .index import Index, bm25_search
from .intrinsic import intrinsic_precision, label_candidates
from .pipeline import (
    METHODS,
    Pipeline,
    expansion_model,
    make_tag,
    parse_topics,
    run_queries,
)
from .text import STOPWORDS, tokenize
from .tuning import default_grid, grid_search_cv, parse_folds, write_folds

_USER_ERRORS = (ConfigurationError, CorpusFormatError, RunFormatError, ValueError, OSError)


def _emit_warnings(warnings: list[str]) -> None:
    for message in warnings:
        click.echo(f"warning: {message}", err=True)


def _load(config_path: str | None, overrides: dict) -> Config:
    try:
        return load_config(config_path, overrides)
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc


_SHARED = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="key = value experiment file; flags win"),
    click.option("--corpus", default=None, help="corpus file, TREC SGML or JSONL"),
    click.option("--index", "index", default=None, help="index file"),
    click.option("--store", default=None, help="mention store file"),
    click.option("--static-vectors", "static_vectors", default=None),
    click.option("--query-embeddings", "query_embeddings", default=None),
    click.option("--stemmer", default=None, type=click.Choice(["kstem", "porter", "none"])),
    click.option("--provider", default=None,
                 type=click.Choice(["deterministic-test", "remote", "precomputed"])),
    click.option("--remote-url", "remote_url", default=None),
    click.option("--b", type=float, default=None),
    click.option("--k1", type=float, default=None),
    click.option("--mu", type=float, default=None),
    click.option("--k", type=int, default=None, help="ranking depth"),
    click.option("--fb-docs", "fb_docs", type=int, default=None),
    click.option("--fb-terms", "fb_terms", type=int, default=None),
    click.option("--fb-lambda", "fb_lambda", type=float, default=None),
    click.option("--dim", type=int, default=None),
    click.option("--radius", type=int, default=None),
    click.option("--embed-seed", "embed_seed", type=int, default=None),
    click.option("--max-pieces", "max_pieces", type=int, default=None),
    click.option("--static-scope", "static_scope", default=None,
                 type=click.Choice(["global", "prf"])),
    click.option("--tag", default=None, help="run tag override"),
]


def shared_options(fn):
    for option in reversed(_SHARED):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """Contextualized and feedback-based query expansion over a TREC-style corpus."""


@main.command("index")
@shared_options
@click.option("--output", required=True, help="index file to write")
def cmd_index(config_path: str | None, output: str, **overrides) -> None:
    """Ingest a corpus and persist the inverted index."""
    cfg = _load(config_path, overrides)
    corpus_path = Path(cfg.require("corpus"))
    try:
        with open(corpus_path, "rb") as handle:
            documents = ingest_auto(handle.read(), STOPWORDS, cfg.stemmer)
    except _USER_ERRORS as exc:
        raise click.ClickException(f"cannot ingest {corpus_path}: {exc}") from exc
    if not documents:
        raise click.ClickException(f"no documents in {corpus_path}")
    index = Index.build(documents)
    index.save(output)
    click.echo(f"indexed {index.doc_count} documents, {len(index.postings)} terms -> {output}")


@main.command("run")
@shared_options
@click.option("--method", required=True, type=click.Choice(METHODS))
@click.option("--topics", "topics_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--output", default="-", help="run file, - for stdout")
def cmd_run(config_path: str | None, method: str, topics_path: str, output: str,
            **overrides) -> None:
    """Rank topics with one method and write a TREC run file."""
    cfg = _load(config_path, overrides)
    try:
        topics = parse_topics(Path(topics_path))
        pipeline = Pipeline.prepare(cfg, method)
        rankings = run_queries(pipeline, topics, method)
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    with click.open_file(output, "w") as stream:
        write_run(stream, list(rankings.values()), make_tag(method, cfg))
    _emit_warnings(pipeline.warnings)


@main.command("eval")
@click.option("--run", "run_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", "qrels_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", default=None, help="comma list, default all")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.option("--output", default="-")
def cmd_eval(run_path: str, qrels_path: str, metrics: str | None, as_json: bool,
             output: str) -> None:
    """Score a run file against qrels."""
    chosen = tuple(m.strip() for m in metrics.split(",")) if metrics else DEFAULT_METRICS
    warnings: list[str] = []
    try:
        rankings, _ = parse_run(Path(run_path))
        qrels = parse_qrels(Path(qrels_path))
        report = evaluate_run(rankings, qrels, chosen, warnings)
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    with click.open_file(output, "w") as stream:
        stream.write(report.to_json() + "\n" if as_json else report.to_tsv())
    _emit_warnings(warnings)


@main.command("expand")
@shared_options
@click.option("--method", required=True,
              type=click.Choice([m for m in METHODS if m != "bm25"]))
@click.option("--topics", "topics_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", "output_dir", required=True)
def cmd_expand(config_path: str | None, method: str, topics_path: str,
               output_dir: str, **overrides) -> None:
    """Write one expansion term distribution file per topic."""
    cfg = _load(config_path, overrides)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        topics = parse_topics(Path(topics_path))
        pipeline = Pipeline.prepare(cfg, method)
        params = {
            "method": method,
            "fb_docs": cfg.fb_docs,
            "fb_terms": cfg.fb_terms,
            "lam": cfg.fb_lambda,
        }
        for query_id, text in topics:
            tokens = tokenize(text, stemmer_id=cfg.stemmer)
            first_pass = bm25_search(
                pipeline.index, tokens, cfg.fb_docs, b=cfg.b, k1=cfg.k1,
                query_id=query_id,
            )
            if method != "static" and not first_pass.entries:
                pipeline.warnings.append(f"query {query_id!r}: empty first pass, skipped")
                continue
            dist = expansion_model(
                pipeline, method, query_id, tokens, first_pass, pipeline.warnings
            )
            with open(out / f"{query_id}.terms.tsv", "w", encoding="utf-8") as stream:
                write_term_distribution(stream, dist, params)
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    _emit_warnings(pipeline.warnings)


@main.command("tune")
@shared_options
@click.option("--method", required=True, type=click.Choice(METHODS))
@click.option("--topics", "topics_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", "qrels_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", default="map")
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--folds-file", "folds_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--write-folds", "write_folds_path", default=None,
              help="save the generated fold assignment")
@click.option("--grid-fb-docs", "grid_fb_docs", default=None, help="comma list")
@click.option("--grid-fb-terms", "grid_fb_terms", default=None, help="comma list")
@click.option("--grid-lambda", "grid_lambda", default=None, help="comma list")
@click.option("--output", default="-")
def cmd_tune(config_path: str | None, method: str, topics_path: str, qrels_path: str,
             metric: str, folds_file: str | None, write_folds_path: str | None,
             grid_fb_docs: str | None, grid_fb_terms: str | None,
             grid_lambda: str | None, output: str, **overrides) -> None:
    """Cross-validated grid search over the feedback parameters."""
    cfg = _load(config_path, overrides)
    grid = _build_grid(grid_fb_docs, grid_fb_terms, grid_lambda)
    warnings: list[str] = []
    try:
        topics = parse_topics(Path(topics_path))
        qrels = parse_qrels(Path(qrels_path))
        pipeline = Pipeline.prepare(cfg, method)
        topic_ids = [qid for qid, _ in topics]

        def evaluate(point):
            pipeline.config = replace(
                cfg, fb_docs=point["fb_docs"], fb_terms=point["fb_terms"],
                fb_lambda=point["lam"],
            )
            rankings = run_queries(pipeline, topics, method, warnings)
            report = evaluate_run(rankings, qrels, (metric,))
            return {qid: report.per_query.get(qid, {}).get(metric) for qid in topic_ids}

        assignments = parse_folds(Path(folds_file)) if folds_file else None
        result = grid_search_cv(
            topic_ids, evaluate, grid, folds=cfg.folds, seed=cfg.seed,
            fold_assignments=assignments,
        )
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    if write_folds_path:
        generated = assignments or {
            qid: fold for fold, qids in result.fold_topics.items() for qid in qids
        }
        with open(write_folds_path, "w", encoding="utf-8") as stream:
            write_folds(stream, generated)
    with click.open_file(output, "w") as stream:
        stream.write("fold\tfb_docs\tfb_terms\tlambda\theld_out_queries\n")
        for fold in sorted(result.fold_params):
            point = result.fold_params[fold]
            stream.write(
                f"{fold}\t{point['fb_docs']}\t{point['fb_terms']}"
                f"\t{point['lam']}\t{len(result.fold_topics[fold])}\n"
            )
        for qid in sorted(result.pooled):
            stream.write(f"query\t{qid}\t{result.pooled[qid]:.6f}\n")
        stream.write(f"pooled\t{metric}\t{result.mean:.6f}\n")
    _emit_warnings(warnings)


def _build_grid(grid_fb_docs, grid_fb_terms, grid_lambda):
    if grid_fb_docs is None and grid_fb_terms is None and grid_lambda is None:
        return default_grid()
    docs = [int(x) for x in (grid_fb_docs or "10").split(",")]
    terms = [int(x) for x in (grid_fb_terms or "20").split(",")]
    lams = [float(x) for x in (grid_lambda or "0.5").split(",")]
    return [
        {"fb_docs": d, "fb_terms": t, "lam": lam}
        for d in docs for t in terms for lam in lams
    ]


@main.command("intrinsic")
@shared_options
@click.option("--method", "methods", required=True, multiple=True,
              type=click.Choice([m for m in METHODS if m != "bm25"]))
@click.option("--topics", "topics_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", "qrels_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pool-depth", "pool_depth", type=int, default=100,
              help="terms ranked and labeled per method per query")
@click.option("--depths", default="10,20,100", help="precision cutoffs, comma list")
@click.option("--output", default="-")
def cmd_intrinsic(config_path: str | None, methods: tuple[str, ...], topics_path: str,
                  qrels_path: str, pool_depth: int, depths: str, output: str,
                  **overrides) -> None:
    """Label pooled expansion terms by one-term recall deltas, then score
    each method's term ranking against the labels."""
    cfg = _load(config_path, overrides)
    cutoffs = sorted(int(x) for x in depths.split(","))
    warnings: list[str] = []
    try:
        topics = parse_topics(Path(topics_path))
        qrels = parse_qrels(Path(qrels_path))
        method_terms, index = _ranked_terms(cfg, methods, topics, pool_depth, warnings)
        labels: dict[str, dict[str, str]] = {}
        deltas: dict[str, dict[str, float]] = {}
        for query_id, text in topics:
            if query_id not in qrels:
                continue
            tokens = tokenize(text, stemmer_id=cfg.stemmer)
            pool = sorted(
                {
                    stem
                    for method in methods
                    for stem in method_terms[method].get(query_id, ())
                    if stem in index.collection_frequency
                }
            )
            judged = label_candidates(
                index, tokens, pool, qrels[query_id], query_id, mu=cfg.mu
            )
            if not judged:
                continue
            labels[query_id] = {label.stem: label.label for label in judged}
            deltas[query_id] = {
                label.stem: label.delta_recall1000 for label in judged
            }
    except _USER_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    with click.open_file(output, "w") as stream:
        for qid in sorted(labels):
            for stem in sorted(labels[qid]):
                stream.write(
                    f"label\t{qid}\t{stem}\t{deltas[qid][stem]!r}\t{labels[qid][stem]}\n"
                )
        for method in methods:
            for k in cutoffs:
                report = intrinsic_precision(method_terms[method], labels, k)
                stream.write(f"precision\t{method}\tp@{k}\t{report.value:.6f}\n")
    _emit_warnings(warnings)


def _ranked_terms(cfg, methods, topics, pool_depth, warnings):
    """Each method's descending-weight term ranking per query."""
    method_terms: dict[str, dict[str, list[str]]] = {}
    index = None
    for method in methods:
        deep_cfg = replace(cfg, fb_terms=pool_depth)
        pipeline = Pipeline.prepare(deep_cfg, method)
        index = pipeline.index
        per_query: dict[str, list[str]] = {}
        for query_id, text in topics:
            tokens = tokenize(text, stemmer_id=cfg.stemmer)
            if not any(not t.is_stopword for t in tokens):
                warnings.append(f"query {query_id!r}: no non-stopword terms, skipped")
                continue
            first_pass = bm25_search(
                pipeline.index, tokens, deep_cfg.fb_docs, b=cfg.b, k1=cfg.k1,
                query_id=query_id,
            )
            if method != "static" and not first_pass.entries:
                warnings.append(f"query {query_id!r}: empty first pass, skipped")
                continue
            try:
                dist = expansion_model(
                    pipeline, method, query_id, tokens, first_pass, warnings
                )
            except ValueError as exc:
                warnings.append(f"query {query_id!r}: expansion failed ({exc})")
                continue
            per_query[query_id] = [stem for stem, _ in dist.top(pool_depth)]
        method_terms[method] = per_query
        warnings.extend(pipeline.warnings)
    return method_terms, index


@main.command("extract-plan")
@shared_options
@click.option("--output", default="-")
def cmd_extract_plan(config_path: str | None, output: str, **overrides) -> None:
    """Dump the tokenized corpus for an external embedding extractor.

    One line per token: doc_id, position, surface, stem, stopword flag.
    An extractor that aligns its own wordpieces to these positions will
    produce mentions the expansion models can join back to the index.
    """
    cfg = _load(config_path, overrides)
    corpus_path = Path(cfg.require("corpus"))
    try:
        with open(corpus_path, "rb") as handle:
            documents = ingest_auto(handle.read(), STOPWORDS, cfg.stemmer)
    except _USER_ERRORS as exc:
        raise click.ClickException(f"cannot ingest {corpus_path}: {exc}") from exc
    with click.open_file(output, "w") as stream:
        for doc in sorted(documents, key=lambda d: d.doc_id):
            for token in doc.tokens:
                flag = 1 if token.is_stopword else 0
                stream.write(
                    f"{doc.doc_id}\t{token.position}\t{token.surface}"
                    f"\t{token.stem}\t{flag}\n"
                )
