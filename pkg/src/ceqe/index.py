"""Inverted index with BM25 and Dirichlet query-likelihood scoring.

The index is immutable once built. Construction sorts documents and vocabulary,
so the in-memory structure and the persisted file are independent of corpus
ingestion order, and repeated builds are byte-identical.

Binary format (version 1, all integers little-endian):

    magic        4 bytes  b"CQIX"
    version      u16      1
    reserved     u16      0
    doc_count    u32
    vocab_size   u32
    collection_len u64
    doc table    doc_count records, ascending doc_id:
                   u16 id_len | id utf-8 | u32 doc_length
    vocab table  vocab_size records, ascending stem:
                   u16 stem_len | stem utf-8 | u64 collection_frequency |
                   u32 df | df x (u32 doc_ordinal, u32 term_frequency)

doc_ordinal indexes the doc table. Postings are sorted by doc_ordinal, which
equals ascending doc_id order.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Document
from .errors import CorpusFormatError, UnknownDocumentError
from .text import Token

__all__ = ["Index", "Ranking", "bm25_search", "ql_log_score"]

_MAGIC = b"CQIX"
_VERSION = 1


@dataclass(frozen=True)
class Ranking:
    """Scored documents for one query, descending score, ties by ascending doc_id."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]


def rank_entries(scored: Iterable[tuple[str, float]], k: int) -> tuple[tuple[str, float], ...]:
    """Top-k by descending score with deterministic doc_id tie-breaking."""
    ordered = sorted(scored, key=lambda e: (-e[1], e[0]))
    return tuple(ordered[:k])


@dataclass
class Index:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    collection_frequency: dict[str, int]
    collection_len: int
    doc_count: int
    doc_terms: dict[str, list[tuple[str, int]]] = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, documents: Sequence[Document]) -> "Index":
        """Count non-stopword stems per document.

        Stopword-flagged tokens are excluded from postings and lengths, so
        doc_lengths equal the per-document sum of term frequencies.
        """
        docs = sorted(documents, key=lambda d: d.doc_id)
        postings: dict[str, list[tuple[str, int]]] = {}
        doc_lengths: dict[str, int] = {}
        for doc in docs:
            counts: dict[str, int] = {}
            for token in doc.tokens:
                if token.is_stopword:
                    continue
                counts[token.stem] = counts.get(token.stem, 0) + 1
            doc_lengths[doc.doc_id] = sum(counts.values())
            for stem in sorted(counts):
                postings.setdefault(stem, []).append((doc.doc_id, counts[stem]))
        collection_frequency = {
            stem: sum(tf for _, tf in plist) for stem, plist in postings.items()
        }
        index = cls(
            postings=dict(sorted(postings.items())),
            doc_lengths=doc_lengths,
            collection_frequency=collection_frequency,
            collection_len=sum(doc_lengths.values()),
            doc_count=len(doc_lengths),
        )
        index._build_forward()
        return index

    def _build_forward(self) -> None:
        forward: dict[str, list[tuple[str, int]]] = {d: [] for d in self.doc_lengths}
        for stem in self.postings:
            for doc_id, tf in self.postings[stem]:
                forward[doc_id].append((stem, tf))
        self.doc_terms = forward

    @property
    def avg_doc_length(self) -> float:
        return self.collection_len / self.doc_count if self.doc_count else 0.0

    def term_frequency(self, stem: str, doc_id: str) -> int:
        for d, tf in self.postings.get(stem, ()):
            if d == doc_id:
                return tf
        return 0

    def background_probability(self, stem: str) -> float:
        """p(w|C) with out-of-vocabulary terms floored at 1/(2*collection_len).

        The floor keeps log scores finite while staying below the
        probability of any term that actually occurs.
        """
        cf = self.collection_frequency.get(stem, 0)
        if cf > 0:
            return cf / self.collection_len
        if self.collection_len == 0:
            return 0.5
        return 1.0 / (2.0 * self.collection_len)

    # ------------------------------------------------------------------
    # Persistence

    def save(self, path: str | Path) -> None:
        doc_ids = sorted(self.doc_lengths)
        ordinals = {doc_id: i for i, doc_id in enumerate(doc_ids)}
        out = bytearray()
        out += _MAGIC
        out += struct.pack("<HH", _VERSION, 0)
        out += struct.pack(
            "<IIQ", self.doc_count, len(self.postings), self.collection_len
        )
        for doc_id in doc_ids:
            raw = doc_id.encode("utf-8")
            out += struct.pack("<H", len(raw)) + raw
            out += struct.pack("<I", self.doc_lengths[doc_id])
        for stem in sorted(self.postings):
            raw = stem.encode("utf-8")
            plist = sorted(self.postings[stem], key=lambda e: ordinals[e[0]])
            out += struct.pack("<H", len(raw)) + raw
            out += struct.pack("<QI", self.collection_frequency[stem], len(plist))
            for doc_id, tf in plist:
                out += struct.pack("<II", ordinals[doc_id], tf)
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        data = Path(path).read_bytes()
        if data[:4] != _MAGIC:
            raise CorpusFormatError(f"{path}: not an index file (bad magic)")
        (version, _reserved) = struct.unpack_from("<HH", data, 4)
        if version != _VERSION:
            raise CorpusFormatError(
                f"{path}: unsupported index format version {version}"
            )
        offset = 8
        doc_count, vocab_size, collection_len = struct.unpack_from("<IIQ", data, offset)
        offset += 16
        doc_ids: list[str] = []
        doc_lengths: dict[str, int] = {}
        for _ in range(doc_count):
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            doc_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            (length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            doc_ids.append(doc_id)
            doc_lengths[doc_id] = length
        postings: dict[str, list[tuple[str, int]]] = {}
        collection_frequency: dict[str, int] = {}
        for _ in range(vocab_size):
            (stem_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            stem = data[offset : offset + stem_len].decode("utf-8")
            offset += stem_len
            cf, df = struct.unpack_from("<QI", data, offset)
            offset += 12
            plist = []
            for _ in range(df):
                ordinal, tf = struct.unpack_from("<II", data, offset)
                offset += 8
                plist.append((doc_ids[ordinal], tf))
            postings[stem] = plist
            collection_frequency[stem] = cf
        index = cls(
            postings=postings,
            doc_lengths=doc_lengths,
            collection_frequency=collection_frequency,
            collection_len=collection_len,
            doc_count=doc_count,
        )
        index._build_forward()
        return index


def _query_stems(query_tokens: Sequence[Token]) -> list[str]:
    return [t.stem for t in query_tokens if not t.is_stopword]


def bm25_search(
    index: Index,
    query_tokens: Sequence[Token],
    k: int,
    b: float = 0.75,
    k1: float = 1.2,
    query_id: str = "",
) -> Ranking:
    """Rank by BM25 with the non-negative Robertson idf.

        idf(q)   = ln(1 + (N - df + 0.5) / (df + 0.5))
        score(D) = sum_q idf(q) * tf * (k1 + 1) / (tf + k1 * (1 - b + b*|D|/avgdl))

    Only documents containing at least one query term are scored; a query
    whose terms are all out of vocabulary yields an empty Ranking.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")
    if k1 <= 0.0:
        raise ValueError(f"k1 must be > 0, got {k1}")
    scores: dict[str, float] = {}
    n = index.doc_count
    avgdl = index.avg_doc_length
    for stem in _query_stems(query_tokens):
        plist = index.postings.get(stem)
        if not plist:
            continue
        df = len(plist)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for doc_id, tf in plist:
            norm = tf + k1 * (1.0 - b + b * index.doc_lengths[doc_id] / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (k1 + 1.0) / norm
    return Ranking(query_id=query_id, entries=rank_entries(scores.items(), k))


def ql_log_score(
    index: Index,
    query_tokens: Sequence[Token],
    doc_id: str,
    mu: float = 1500.0,
) -> float:
    """Dirichlet-smoothed query log-likelihood of one document.

        log p(Q|D) = sum_q log[(tf(q, D) + mu * p(q|C)) / (|D| + mu)]

    Stopword-flagged query tokens are skipped. Out-of-vocabulary terms use
    the floored background probability, so scores are always finite.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if doc_id not in index.doc_lengths:
        raise UnknownDocumentError(doc_id)
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for stem in _query_stems(query_tokens):
        tf = index.term_frequency(stem, doc_id)
        p_bg = index.background_probability(stem)
        score += math.log((tf + mu * p_bg) / (doc_len + mu))
    return score
