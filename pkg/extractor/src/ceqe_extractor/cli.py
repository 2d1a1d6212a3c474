"""Command line entry points: extract, extract-queries, serve."""
from __future__ import annotations

from pathlib import Path

import click

from . import __version__
from .encoder import ModelSession
from .errors import ExtractorError
from .extract import extract_corpus, extract_queries, render_query_embeddings
from .plan import parse_plan, plan_from_corpus
from .storefile import write_store

_STEMMERS = click.Choice(["kstem", "porter", "none"])


def _model_options(fn):
    for option in reversed(
        [
            click.option("--model", "model_path", required=True,
                         help="model directory or hub name"),
            click.option("--layer", type=int, default=11, show_default=True,
                         help="hidden-state layer, 0 = embeddings"),
            click.option("--max-pieces", type=int, default=128, show_default=True),
        ]
    ):
        fn = option(fn)
    return fn


def _session(model_path: str, layer: int) -> ModelSession:
    try:
        return ModelSession(model_path, layer=layer)
    except ExtractorError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Extract contextualized mention vectors for the retrieval package."""


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), default=None,
              help="corpus file, tokenized via the `ceqe` command")
@click.option("--plan", "plan_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="plan file from `ceqe extract-plan`")
@click.option("--stemmer", type=_STEMMERS, default="kstem", show_default=True,
              help="analysis chain to request when --corpus is given")
@_model_options
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--output", required=True, type=click.Path(dir_okay=False))
def extract(
    corpus: str | None,
    plan_path: str | None,
    stemmer: str,
    model_path: str,
    layer: int,
    max_pieces: int,
    batch_size: int,
    output: str,
) -> None:
    """Embed a corpus into a mention store file."""
    if (corpus is None) == (plan_path is None):
        raise click.UsageError("pass exactly one of --corpus or --plan")
    try:
        if plan_path is not None:
            plan_text = Path(plan_path).read_text(encoding="utf-8")
        else:
            plan_text = plan_from_corpus(corpus, stemmer)
        docs = parse_plan(plan_text)
        session = _session(model_path, layer)
        result = extract_corpus(
            docs, session, max_pieces=max_pieces, batch_size=batch_size
        )
        write_store(output, result.mentions, session.dim, result.doc_ids)
    except ExtractorError as exc:
        raise click.ClickException(str(exc)) from exc
    for t in result.truncations:
        click.echo(
            f"warning: {t.doc_id} position {t.position}: {t.piece_count} pieces "
            f"exceed the {t.budget}-piece budget, token skipped",
            err=True,
        )
    click.echo(
        f"wrote {len(result.mentions)} mentions over {len(result.doc_ids)} "
        f"documents to {output}"
    )


@main.command("extract-queries")
@click.option("--topics", required=True, type=click.Path(exists=True, dir_okay=False),
              help="query_id<TAB>text lines")
@click.option("--stemmer", type=_STEMMERS, default="kstem", show_default=True)
@_model_options
@click.option("--output", required=True)
def extract_queries_cmd(
    topics: str,
    stemmer: str,
    model_path: str,
    layer: int,
    max_pieces: int,
    output: str,
) -> None:
    """Embed topics into a query-embeddings JSON file."""
    try:
        session = _session(model_path, layer)
        payload = extract_queries(
            Path(topics).read_text(encoding="utf-8"),
            session,
            stemmer=stemmer,
            max_pieces=max_pieces,
        )
    except ExtractorError as exc:
        raise click.ClickException(str(exc)) from exc
    with click.open_file(output, "w") as stream:
        stream.write(render_query_embeddings(payload))
    click.echo(f"wrote {len(payload['queries'])} query embeddings", err=True)


@main.command()
@_model_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(model_path: str, layer: int, max_pieces: int, host: str, port: int) -> None:
    """Serve per-piece vectors over HTTP for the remote provider."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(_session(model_path, layer), max_pieces=max_pieces)
    except ExtractorError as exc:
        raise click.ClickException(str(exc)) from exc
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
