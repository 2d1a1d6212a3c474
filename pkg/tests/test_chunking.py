import numpy as np
import pytest

from ceqe.embed.chunking import TruncationWarning, aggregate_wordpieces, chunk_document
from conftest import make_document


def spans(chunks):
    return [c.token_span for c in chunks]


def test_small_doc_single_chunk():
    doc = make_document("d1", " ".join(f"w{i}" for i in range(10)))
    chunks = chunk_document(doc, max_pieces=128)
    assert spans(chunks) == [(0, 10)]
    assert chunks[0].doc_id == "d1"
    assert chunks[0].chunk_index == 0


def test_budget_reserves_special_tokens():
    # 300 one-piece words against a 128-piece window leave 126 per chunk
    doc = make_document("d1", " ".join(f"w{i}" for i in range(300)))
    chunks = chunk_document(doc, max_pieces=128)
    assert spans(chunks) == [(0, 126), (126, 252), (252, 300)]
    assert [c.chunk_index for c in chunks] == [0, 1, 2]


def test_empty_document():
    assert chunk_document(make_document("d1", ""), max_pieces=128) == []


def test_chunks_tile_the_document():
    doc = make_document("d1", " ".join(f"w{i}" for i in range(57)))
    chunks = chunk_document(doc, max_pieces=12)
    covered = []
    for chunk in chunks:
        start, end = chunk.token_span
        covered.extend(range(start, end))
    assert covered == list(range(57))


def test_multi_piece_words_pack_greedily():
    doc = make_document("d1", "a b c d")
    chunks = chunk_document(doc, max_pieces=6, piece_counts=[2, 2, 2, 1])
    # budget is 4 pieces; a+b fill the first chunk, c+d the second
    assert spans(chunks) == [(0, 2), (2, 4)]


def test_oversized_word_truncated_with_warning():
    doc = make_document("d1", "a gigantic b")
    warnings: list[TruncationWarning] = []
    chunks = chunk_document(doc, max_pieces=6, piece_counts=[1, 99, 1], warnings=warnings)
    assert spans(chunks) == [(0, 1), (1, 2), (2, 3)]
    assert len(warnings) == 1
    assert warnings[0].doc_id == "d1"
    assert warnings[0].position == 1
    assert warnings[0].piece_count == 99
    assert warnings[0].budget == 4


def test_max_pieces_validation():
    with pytest.raises(ValueError):
        chunk_document(make_document("d1", "a"), max_pieces=1)


def test_aggregate_identity():
    v = np.array([[1.0, 2.0, 3.0]])
    out = aggregate_wordpieces(v, [(0, 1)])
    assert np.array_equal(out[0], v[0])


def test_aggregate_mean_of_basis_vectors():
    pieces = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = aggregate_wordpieces(pieces, [(0, 2)])
    assert np.allclose(out[0], [0.5, 0.5])


def test_aggregate_matches_brute_force():
    rng = np.random.default_rng(7)
    pieces = rng.standard_normal((3, 5))
    out = aggregate_wordpieces(pieces, [(0, 2), (2, 3)])
    assert np.allclose(out[0], pieces[:2].mean(axis=0), atol=1e-12)
    assert np.allclose(out[1], pieces[2], atol=1e-12)


def test_aggregate_rejects_empty_span():
    pieces = np.zeros((2, 3))
    with pytest.raises(ValueError):
        aggregate_wordpieces(pieces, [(0, 0), (0, 2)])


def test_aggregate_rejects_overlap():
    pieces = np.zeros((3, 2))
    with pytest.raises(ValueError):
        aggregate_wordpieces(pieces, [(0, 2), (1, 3)])


def test_aggregate_rejects_out_of_range():
    pieces = np.zeros((2, 2))
    with pytest.raises(ValueError):
        aggregate_wordpieces(pieces, [(0, 3)])


def test_aggregate_permutation_equivariant():
    rng = np.random.default_rng(11)
    pieces = rng.standard_normal((6, 4))
    forward = aggregate_wordpieces(pieces, [(0, 2), (2, 5), (5, 6)])
    swapped = aggregate_wordpieces(pieces, [(5, 6), (0, 2), (2, 5)])
    assert np.allclose(forward[0], swapped[1])
    assert np.allclose(forward[1], swapped[2])
    assert np.allclose(forward[2], swapped[0])


def test_aggregate_linear_in_inputs():
    rng = np.random.default_rng(13)
    pieces = rng.standard_normal((4, 3))
    base = aggregate_wordpieces(pieces, [(0, 2), (2, 4)])
    scaled = aggregate_wordpieces(3.0 * pieces, [(0, 2), (2, 4)])
    for b, s in zip(base, scaled):
        assert np.allclose(3.0 * b, s, atol=1e-12)
