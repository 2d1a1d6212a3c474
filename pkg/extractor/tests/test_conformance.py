"""Conformance against the retrieval package's external interfaces.

These tests import the retrieval package on purpose: the extractor's whole
job is to feed it, so the contract checks load extractor output through
the consumer's own readers. Four clauses, each printing a verdict line:
the store opens with zero warnings, mentions cover exactly the
extractable tokens, stored vectors are the per-piece means, and the HTTP
service agrees with offline extraction through the consumer's remote
provider.
"""
from __future__ import annotations

import json
from pathlib import Path
from types import SimpleNamespace

import httpx
import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from ceqe.cli import main as ceqe_main
from ceqe.corpus import ingest_jsonl
from ceqe.embed.chunking import aggregate_wordpieces, chunk_document
from ceqe.embed.providers import RemoteProvider
from ceqe.embed.query import embed_query
from ceqe.embed.store import MentionStore
from ceqe.evaluation import parse_run
from ceqe.pipeline import load_query_embeddings

from ceqe_extractor.cli import main as extractor_main
from ceqe_extractor.service import create_app

from conftest import HIDDEN

MAX_PIECES = 16

DOCS = [
    ("c1", "the river water flow near the riverbank"),
    ("c2", "money deposit at the bank credit"),
    ("c3", "storm rain cloud sky " + "ab" * MAX_PIECES),
    ("c4", "apple orange"),
    ("c5", "the of at a"),
]

TOPICS = "t1\tthe river bank\nt2\tmoney deposit credit\n"


def verdict(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory, model_dir, model_session):
    root = tmp_path_factory.mktemp("conformance")
    corpus = root / "corpus.jsonl"
    corpus.write_text(
        "".join(json.dumps({"id": i, "contents": c}) + "\n" for i, c in DOCS),
        encoding="utf-8",
    )
    plan = root / "plan.tsv"
    result = CliRunner().invoke(
        ceqe_main,
        ["extract-plan", "--corpus", str(corpus), "--stemmer", "none",
         "--output", str(plan)],
    )
    assert result.exit_code == 0, result.output

    store = root / "store.cqms"
    result = CliRunner().invoke(
        extractor_main,
        ["extract", "--plan", str(plan), "--model", model_dir, "--layer", "3",
         "--max-pieces", str(MAX_PIECES), "--output", str(store)],
    )
    assert result.exit_code == 0, result.output

    topics = root / "topics.tsv"
    topics.write_text(TOPICS, encoding="utf-8")
    queries = root / "queries.json"
    result = CliRunner().invoke(
        extractor_main,
        ["extract-queries", "--topics", str(topics), "--stemmer", "none",
         "--model", model_dir, "--layer", "3", "--max-pieces", "32",
         "--output", str(queries)],
    )
    assert result.exit_code == 0, result.output

    documents = ingest_jsonl(corpus.read_bytes(), stemmer_id="none")
    return SimpleNamespace(
        root=root, corpus=corpus, plan=plan, store=store, topics=topics,
        queries=queries, documents=documents,
    )


def _expected_layout(artifacts, model_session):
    """Chunk every document the consumer's way and list extractable tokens."""
    per_doc = {}
    for doc in artifacts.documents:
        truncations = []
        chunks = chunk_document(
            doc, MAX_PIECES, piece_counts=model_session.piece_count,
            warnings=truncations,
        )
        truncated = {t.position for t in truncations}
        per_doc[doc.doc_id] = (doc, chunks, truncated)
    return per_doc


def test_store_opens_with_zero_warnings(artifacts, capsys):
    warnings = []
    store = MentionStore.open(artifacts.store, warnings=warnings)
    ok = warnings == [] and store.dim == HIDDEN
    ok = ok and store.doc_ids == {doc_id for doc_id, _ in DOCS}
    verdict(
        capsys, "extractor store loads clean", ok,
        f"{len(store)} mentions, dim {store.dim}, {len(warnings)} warnings",
    )


def test_mentions_cover_exactly_the_extractable_tokens(
    artifacts, model_session, capsys
):
    store = MentionStore.open(artifacts.store)
    expected = set()
    truncated_total = 0
    for doc, chunks, truncated in _expected_layout(artifacts, model_session).values():
        truncated_total += len(truncated)
        for chunk in chunks:
            start, end = chunk.token_span
            for token in doc.tokens[start:end]:
                if token.is_stopword or token.position in truncated:
                    continue
                expected.add(
                    (doc.doc_id, token.stem, chunk.chunk_index, token.position)
                )
    actual = {
        (m.doc_id, m.stem, m.chunk_index, m.position) for m in store.all_mentions()
    }
    # the corpus must actually exercise the skip rules for this to mean much
    ok = truncated_total >= 1 and actual == expected and len(store) == len(expected)
    verdict(
        capsys, "one mention per extractable token", ok,
        f"{len(actual)} mentions == {len(expected)} extractable tokens, "
        f"{truncated_total} truncated",
    )


def test_stored_vectors_are_wordpiece_means(artifacts, model_session, capsys):
    store = MentionStore.open(artifacts.store)
    by_slot = {
        (m.doc_id, m.position): m.vector for m in store.all_mentions()
    }
    worst = 0.0
    compared = 0
    for doc, chunks, truncated in _expected_layout(artifacts, model_session).values():
        for chunk in chunks:
            start, end = chunk.token_span
            tokens = doc.tokens[start:end]
            if all(t.position in truncated for t in tokens):
                continue
            encoded = model_session.encode_batch([[t.surface for t in tokens]])[0]
            pieces = encoded.pieces.astype(np.float64)
            for token, (lo, hi) in zip(tokens, encoded.word_spans):
                if token.is_stopword or token.position in truncated:
                    continue
                mean = pieces[lo:hi].mean(axis=0)
                diff = np.max(np.abs(by_slot[(doc.doc_id, token.position)] - mean))
                worst = max(worst, float(diff))
                compared += 1
    ok = compared == len(store) and worst <= 1e-5
    verdict(
        capsys, "stored vectors are piece means", ok,
        f"{compared} vectors, max abs diff {worst:.2e} <= 1e-5",
    )


def _bridged_provider(model_session, max_pieces):
    """The consumer's HTTP client wired straight into the service app."""
    client = TestClient(create_app(model_session, max_pieces=max_pieces))

    def handler(request: httpx.Request) -> httpx.Response:
        relayed = client.post(
            "/embed", content=request.content,
            headers={"content-type": "application/json"},
        )
        return httpx.Response(relayed.status_code, content=relayed.content)

    return RemoteProvider("http://extractor.test", transport=httpx.MockTransport(handler))


def test_service_agrees_with_offline_extraction(artifacts, model_session, capsys):
    store = MentionStore.open(artifacts.store)
    by_slot = {(m.doc_id, m.position): m.vector for m in store.all_mentions()}
    provider = _bridged_provider(model_session, MAX_PIECES)
    worst = 0.0
    compared = 0
    for doc, chunks, truncated in _expected_layout(artifacts, model_session).values():
        for chunk in chunks:
            start, end = chunk.token_span
            tokens = doc.tokens[start:end]
            if all(t.position in truncated for t in tokens):
                continue
            encoded = provider.encode([t.surface for t in tokens])
            served = aggregate_wordpieces(encoded.pieces, encoded.word_spans)
            for token, vector in zip(tokens, served):
                if token.is_stopword or token.position in truncated:
                    continue
                diff = np.max(np.abs(by_slot[(doc.doc_id, token.position)] - vector))
                worst = max(worst, float(diff))
                compared += 1
    dimension_ok = provider.dimension == store.dim == HIDDEN
    provider.close()
    ok = dimension_ok and compared == len(store) and worst <= 1e-5
    verdict(
        capsys, "serve matches extract", ok,
        f"{compared} vectors over the wire, max abs diff {worst:.2e} <= 1e-5",
    )


def test_service_rejects_oversized_texts_like_the_consumer_expects(model_session):
    provider = _bridged_provider(model_session, MAX_PIECES)
    with pytest.raises(RuntimeError, match=f"limit is {MAX_PIECES}"):
        provider.encode(["river"] * MAX_PIECES)
    provider.close()


def test_query_embeddings_match_the_consumer_online_path(artifacts, model_session):
    embeddings, dim = load_query_embeddings(artifacts.queries)
    assert dim == HIDDEN and set(embeddings) == {"t1", "t2"}

    topics_corpus = "".join(
        json.dumps({"id": qid, "contents": text}) + "\n"
        for qid, text in (line.split("\t") for line in TOPICS.strip().splitlines())
    )
    provider = _bridged_provider(model_session, 32)
    for doc in ingest_jsonl(topics_corpus.encode(), stemmer_id="none"):
        online = embed_query(doc.tokens, provider, query_id=doc.doc_id)
        offline = embeddings[doc.doc_id]
        assert np.max(np.abs(online.centroid - offline.centroid)) <= 1e-5
        assert set(online.per_term) == set(offline.per_term)
        for stem, vector in online.per_term.items():
            assert np.max(np.abs(vector - offline.per_term[stem])) <= 1e-5
    provider.close()


def test_extractor_output_drives_a_full_retrieval_run(artifacts):
    run_path = artifacts.root / "run.txt"
    result = CliRunner().invoke(
        ceqe_main,
        ["run", "--method", "ceqe-max", "--topics", str(artifacts.topics),
         "--corpus", str(artifacts.corpus), "--stemmer", "none",
         "--store", str(artifacts.store), "--provider", "precomputed",
         "--query-embeddings", str(artifacts.queries),
         "--fb-docs", "3", "--fb-terms", "5", "--k", "5",
         "--output", str(run_path)],
    )
    assert result.exit_code == 0, result.output
    rankings, _ = parse_run(run_path)
    assert set(rankings) == {"t1", "t2"}
    assert all(r.entries for r in rankings.values())
