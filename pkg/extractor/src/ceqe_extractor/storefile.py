"""Writer for the mention-vector store file the retrieval package reads.

Layout (version 1, integers little-endian):

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

Mentions are grouped by (doc_id, stem) key and ordered by (chunk_index,
position) within a key. The doc table lists every document extraction ran
over, including documents that produced no mentions, so the reader can
tell "no mentions" from "never extracted".
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = ["Mention", "write_store"]

_MAGIC = b"CQMS"
_VERSION = 1
_U32_MAX = 2**32 - 1


@dataclass(frozen=True)
class Mention:
    stem: str
    doc_id: str
    chunk_index: int
    position: int
    vector: np.ndarray


def _short(label: str, text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"{label} {text[:40]!r}... exceeds the 65535-byte limit")
    return struct.pack("<H", len(raw)) + raw


def write_store(
    path: str | Path,
    mentions: Iterable[Mention],
    dim: int,
    doc_ids: Iterable[str] = (),
) -> int:
    """Validate, sort, and serialize mentions; returns the mention count."""
    items = sorted(
        mentions, key=lambda m: (m.doc_id, m.stem, m.chunk_index, m.position)
    )
    covered = set(doc_ids)
    slots: set[tuple[str, int, int]] = set()
    meta = np.zeros((len(items), 2), dtype="<u4")
    vectors = np.zeros((len(items), dim), dtype="<f4")
    keys: dict[tuple[str, str], tuple[int, int]] = {}
    for i, m in enumerate(items):
        vec = np.asarray(m.vector, dtype=np.float32)
        if vec.shape != (dim,):
            raise ValueError(f"mention vector of shape {vec.shape} in a dim={dim} store")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite vector for ({m.doc_id!r}, {m.stem!r})")
        if not 0 <= m.chunk_index <= _U32_MAX or not 0 <= m.position <= _U32_MAX:
            raise ValueError(
                f"chunk/position ({m.chunk_index}, {m.position}) out of u32 range"
            )
        slot = (m.doc_id, m.chunk_index, m.position)
        if slot in slots:
            raise ValueError(f"duplicate mention slot {slot}")
        slots.add(slot)
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

    table = sorted(covered)
    ordinals = {d: i for i, d in enumerate(table)}
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<HH", _VERSION, 0)
    out += struct.pack("<IQ", dim, len(items))
    out += struct.pack("<II", len(table), len(keys))
    for doc_id in table:
        out += _short("doc_id", doc_id)
    for doc_id, stem in sorted(keys):
        start, count = keys[(doc_id, stem)]
        out += struct.pack("<I", ordinals[doc_id]) + _short("stem", stem)
        out += struct.pack("<QI", start, count)
    out += meta.tobytes()
    out += vectors.tobytes()
    Path(path).write_bytes(bytes(out))
    return len(items)
