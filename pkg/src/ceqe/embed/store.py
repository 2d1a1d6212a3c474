"""On-disk mention-vector store.

Binary format (version 1, all integers little-endian):

    magic          4 bytes  b"CQMS"
    version        u16      1
    reserved       u16      0
    dim            u32
    mention_count  u64
    doc_count      u32
    key_count      u32
    doc table      doc_count x { u16 len | doc_id utf-8 }, ascending doc_id
    key table      key_count x { u32 doc_ordinal | u16 len | stem utf-8 |
                                 u64 start | u32 count }, ascending (doc_id, stem)
    mention meta   mention_count x { u32 chunk_index | u32 position }
    vectors        mention_count x dim x f32, row-major

Mentions are laid out grouped by key and ordered by (chunk_index, position)
within a key; start/count in the key table index into the meta and vector
blocks. The doc table lists every document the store was built over, so a
document with no surviving mentions is still distinguishable from an unknown
one. The vector block sits at a fixed offset from the tables and can be
memory-mapped directly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..corpus import Document
from ..errors import CorpusFormatError, UnknownDocumentError
from .chunking import TruncationWarning, aggregate_wordpieces, chunk_document
from .providers import EmbeddingProvider

__all__ = [
    "MentionEmbedding",
    "MentionStore",
    "build_mention_store",
    "extract_mentions",
    "mentions_of",
    "write_mention_store",
]

_MAGIC = b"CQMS"
_VERSION = 1


@dataclass(frozen=True)
class MentionEmbedding:
    """One occurrence of a stem in a document chunk with its context vector."""

    stem: str
    doc_id: str
    chunk_index: int
    position: int
    vector: np.ndarray


class MentionStore:
    """Immutable mention lookup keyed by (doc_id, stem)."""

    def __init__(
        self,
        dim: int,
        doc_ids: Sequence[str],
        keys: dict[tuple[str, str], tuple[int, int]],
        meta: np.ndarray,
        vectors: np.ndarray,
    ) -> None:
        self.dim = dim
        self._doc_ids = frozenset(doc_ids)
        self._keys = keys
        self._meta = meta
        self._vectors = vectors
        self._doc_stems: dict[str, list[str]] = {}
        for doc_id, stem in keys:
            self._doc_stems.setdefault(doc_id, []).append(stem)
        for stems in self._doc_stems.values():
            stems.sort()

    def __len__(self) -> int:
        return len(self._vectors)

    @property
    def doc_ids(self) -> frozenset[str]:
        return self._doc_ids

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._doc_ids

    def doc_stems(self, doc_id: str) -> list[str]:
        """Distinct stems with at least one mention in the document, sorted."""
        if doc_id not in self._doc_ids:
            raise UnknownDocumentError(doc_id)
        return list(self._doc_stems.get(doc_id, ()))

    def mentions(self, doc_id: str, stem: str) -> list[MentionEmbedding]:
        if doc_id not in self._doc_ids:
            raise UnknownDocumentError(doc_id)
        span = self._keys.get((doc_id, stem))
        if span is None:
            return []
        start, count = span
        out = []
        for i in range(start, start + count):
            out.append(
                MentionEmbedding(
                    stem=stem,
                    doc_id=doc_id,
                    chunk_index=int(self._meta[i, 0]),
                    position=int(self._meta[i, 1]),
                    vector=self._vectors[i],
                )
            )
        return out

    def mention_vectors(self, doc_id: str, stem: str) -> np.ndarray:
        """Vector rows for a key without per-mention object overhead."""
        if doc_id not in self._doc_ids:
            raise UnknownDocumentError(doc_id)
        span = self._keys.get((doc_id, stem))
        if span is None:
            return self._vectors[0:0]
        start, count = span
        return self._vectors[start : start + count]

    def all_mentions(self) -> Iterable[MentionEmbedding]:
        for (doc_id, stem), (start, count) in self._keys.items():
            for i in range(start, start + count):
                yield MentionEmbedding(
                    stem=stem,
                    doc_id=doc_id,
                    chunk_index=int(self._meta[i, 0]),
                    position=int(self._meta[i, 1]),
                    vector=self._vectors[i],
                )

    # ------------------------------------------------------------------

    @classmethod
    def from_mentions(
        cls,
        mentions: Iterable[MentionEmbedding],
        dim: int,
        doc_ids: Iterable[str] = (),
    ) -> "MentionStore":
        """Assemble an in-memory store; validates the store invariants."""
        items = sorted(
            mentions,
            key=lambda m: (m.doc_id, m.stem, m.chunk_index, m.position),
        )
        covered = set(doc_ids)
        seen_slots: set[tuple[str, int, int]] = set()
        keys: dict[tuple[str, str], tuple[int, int]] = {}
        meta = np.zeros((len(items), 2), dtype=np.uint32)
        vectors = np.zeros((len(items), dim), dtype=np.float32)
        for i, m in enumerate(items):
            vec = np.asarray(m.vector, dtype=np.float32)
            if vec.shape != (dim,):
                raise ValueError(
                    f"mention vector of shape {vec.shape} in a dim={dim} store"
                )
            if not np.all(np.isfinite(vec)):
                raise ValueError(
                    f"non-finite mention vector for ({m.doc_id!r}, {m.stem!r})"
                )
            slot = (m.doc_id, m.chunk_index, m.position)
            if slot in seen_slots:
                raise ValueError(f"duplicate mention slot {slot}")
            seen_slots.add(slot)
            covered.add(m.doc_id)
            key = (m.doc_id, m.stem)
            if key in keys:
                start, count = keys[key]
                keys[key] = (start, count + 1)
            else:
                keys[key] = (i, 1)
            meta[i, 0] = m.chunk_index
            meta[i, 1] = m.position
            vectors[i] = vec
        return cls(dim=dim, doc_ids=sorted(covered), keys=keys, meta=meta, vectors=vectors)

    def save(self, path: str | Path) -> None:
        doc_ids = sorted(self._doc_ids)
        ordinals = {d: i for i, d in enumerate(doc_ids)}
        out = bytearray()
        out += _MAGIC
        out += struct.pack("<HH", _VERSION, 0)
        out += struct.pack("<IQ", self.dim, len(self._vectors))
        out += struct.pack("<II", len(doc_ids), len(self._keys))
        for doc_id in doc_ids:
            raw = doc_id.encode("utf-8")
            out += struct.pack("<H", len(raw)) + raw
        for (doc_id, stem) in sorted(self._keys):
            start, count = self._keys[(doc_id, stem)]
            raw = stem.encode("utf-8")
            out += struct.pack("<IH", ordinals[doc_id], len(raw)) + raw
            out += struct.pack("<QI", start, count)
        out += np.ascontiguousarray(self._meta, dtype="<u4").tobytes()
        out += np.ascontiguousarray(self._vectors, dtype="<f4").tobytes()
        Path(path).write_bytes(bytes(out))

    @classmethod
    def open(
        cls,
        path: str | Path,
        warnings: list[str] | None = None,
        mmap_vectors: bool = False,
    ) -> "MentionStore":
        """Read a store file; structural damage raises, oddities warn.

        Soft anomalies (unsorted tables, non-finite vectors, duplicate
        mention slots) are appended to ``warnings`` when a list is given; a
        clean file produces none.
        """
        path = Path(path)
        data = path.read_bytes()
        if data[:4] != _MAGIC:
            raise CorpusFormatError(f"{path}: not a mention store (bad magic)")
        version, _ = struct.unpack_from("<HH", data, 4)
        if version != _VERSION:
            raise CorpusFormatError(f"{path}: unsupported store version {version}")
        dim, count = struct.unpack_from("<IQ", data, 8)
        doc_count, key_count = struct.unpack_from("<II", data, 20)
        offset = 28
        doc_ids: list[str] = []
        for _ in range(doc_count):
            (n,) = struct.unpack_from("<H", data, offset)
            offset += 2
            doc_ids.append(data[offset : offset + n].decode("utf-8"))
            offset += n
        if warnings is not None and doc_ids != sorted(doc_ids):
            warnings.append(f"{path}: doc table not sorted")
        keys: dict[tuple[str, str], tuple[int, int]] = {}
        key_order: list[tuple[str, str]] = []
        total = 0
        for _ in range(key_count):
            ordinal, n = struct.unpack_from("<IH", data, offset)
            offset += 6
            stem = data[offset : offset + n].decode("utf-8")
            offset += n
            start, cnt = struct.unpack_from("<QI", data, offset)
            offset += 12
            if ordinal >= doc_count:
                raise CorpusFormatError(f"{path}: key references doc ordinal {ordinal}")
            key = (doc_ids[ordinal], stem)
            if key in keys:
                raise CorpusFormatError(f"{path}: duplicate key {key}")
            if start + cnt > count:
                raise CorpusFormatError(f"{path}: key {key} points past mention block")
            keys[key] = (start, cnt)
            key_order.append(key)
            total += cnt
        if total != count:
            raise CorpusFormatError(
                f"{path}: key table covers {total} of {count} mentions"
            )
        if warnings is not None and key_order != sorted(key_order):
            warnings.append(f"{path}: key table not sorted")
        meta_bytes = count * 8
        vec_bytes = count * dim * 4
        if len(data) != offset + meta_bytes + vec_bytes:
            raise CorpusFormatError(
                f"{path}: expected {offset + meta_bytes + vec_bytes} bytes, found {len(data)}"
            )
        meta = np.frombuffer(data, dtype="<u4", count=count * 2, offset=offset).reshape(
            count, 2
        )
        if mmap_vectors:
            vectors = np.memmap(
                path, dtype="<f4", mode="r", offset=offset + meta_bytes, shape=(count, dim)
            )
        else:
            vectors = np.frombuffer(
                data, dtype="<f4", count=count * dim, offset=offset + meta_bytes
            ).reshape(count, dim)
        if warnings is not None:
            if count and not np.all(np.isfinite(vectors)):
                warnings.append(f"{path}: non-finite vectors present")
            slots: set[tuple[str, int, int]] = set()
            duplicate = False
            for (doc_id, _stem), (start, cnt) in keys.items():
                for i in range(start, start + cnt):
                    slot = (doc_id, int(meta[i, 0]), int(meta[i, 1]))
                    if slot in slots:
                        duplicate = True
                    slots.add(slot)
            if duplicate:
                warnings.append(f"{path}: duplicate mention slots")
        return cls(dim=dim, doc_ids=doc_ids, keys=keys, meta=meta, vectors=vectors)


def mentions_of(store: MentionStore, doc_id: str, stem: str) -> list[MentionEmbedding]:
    """All mentions of stem in doc, ordered by (chunk_index, position)."""
    return store.mentions(doc_id, stem)


def extract_mentions(
    doc: Document,
    provider: EmbeddingProvider,
    max_pieces: int = 128,
    warnings: list[TruncationWarning] | None = None,
) -> list[MentionEmbedding]:
    """Embed one document and emit a mention per non-stopword token.

    The document is chunked under the provider's piece budget, each chunk is
    encoded as a whole so vectors see their chunk context, and word vectors
    are piece means. Stopword-flagged tokens contribute context but no
    mention of their own; truncated tokens are skipped entirely.
    """
    truncation: list[TruncationWarning] = [] if warnings is None else warnings
    chunks = chunk_document(doc, max_pieces, warnings=truncation)
    truncated = {(w.doc_id, w.position) for w in truncation if w.doc_id == doc.doc_id}
    stream = [t.stem if provider.prepares == "stem" else t.surface for t in doc.tokens]
    mentions: list[MentionEmbedding] = []
    for chunk in chunks:
        start, end = chunk.token_span
        if all((doc.doc_id, t.position) in truncated for t in doc.tokens[start:end]):
            continue
        encoded = provider.encode(stream[start:end])
        word_vectors = aggregate_wordpieces(encoded.pieces, encoded.word_spans)
        for token, vector in zip(doc.tokens[start:end], word_vectors):
            if token.is_stopword or (doc.doc_id, token.position) in truncated:
                continue
            mentions.append(
                MentionEmbedding(
                    stem=token.stem,
                    doc_id=doc.doc_id,
                    chunk_index=chunk.chunk_index,
                    position=token.position,
                    vector=np.asarray(vector, dtype=np.float32),
                )
            )
    return mentions


def build_mention_store(
    documents: Sequence[Document],
    provider: EmbeddingProvider,
    max_pieces: int = 128,
    warnings: list[TruncationWarning] | None = None,
) -> MentionStore:
    """Extract mentions for a whole corpus into an in-memory store."""
    mentions: list[MentionEmbedding] = []
    for doc in sorted(documents, key=lambda d: d.doc_id):
        mentions.extend(extract_mentions(doc, provider, max_pieces, warnings))
    return MentionStore.from_mentions(
        mentions, dim=provider.dimension, doc_ids=[d.doc_id for d in documents]
    )


def write_mention_store(
    path: str | Path,
    mentions: Iterable[MentionEmbedding],
    dim: int,
    doc_ids: Iterable[str] = (),
) -> None:
    MentionStore.from_mentions(mentions, dim=dim, doc_ids=doc_ids).save(path)
