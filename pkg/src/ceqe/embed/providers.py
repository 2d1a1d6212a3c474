"""Embedding providers: deterministic test embedder and remote HTTP client.

Real contextualized vectors come from the extractor service or from a
precomputed mention store; the deterministic test embedder stands in for the
transformer at desk scale so every pipeline stage can be verified without
model weights.
"""
from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CLS_MARKER",
    "SEP_MARKER",
    "EncodedText",
    "EmbeddingProvider",
    "DeterministicTestProvider",
    "RemoteProvider",
    "deterministic_test_embedder",
]

CLS_MARKER = "[CLS]"
SEP_MARKER = "[SEP]"


@dataclass(frozen=True)
class EncodedText:
    """Per-piece vectors for one text.

    pieces[0] and pieces[-1] are the start/end special-token vectors;
    word_spans[i] is the [start, end) piece range of input word i and never
    covers the special positions.
    """

    pieces: np.ndarray
    word_spans: tuple[tuple[int, int], ...]


def _hash_rng(*parts: str, seed: int) -> np.random.Generator:
    digest = hashlib.blake2b(
        "\x1f".join([str(seed), *parts]).encode("utf-8"), digest_size=8
    ).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def _base_vector(stem: str, dim: int, seed: int) -> np.ndarray:
    v = _hash_rng("base", stem, seed=seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def deterministic_test_embedder(
    stem: str,
    context_window: Sequence[str],
    dim: int = 32,
    seed: int = 0,
    stem_weight: float = 0.35,
    context_weight: float = 0.60,
    jitter_weight: float = 0.05,
) -> np.ndarray:
    """Pure function of (stem, context multiset) onto the unit sphere.

    The vector mixes a hash-derived identity direction for the stem with the
    mean identity direction of the context stems, plus a small jitter keyed
    on the exact (stem, context) pair. Mentions of one stem in similar
    contexts therefore land near each other while different context
    multisets give distinct vectors, which is the behavior the expansion
    models rely on from a contextualized encoder. Context order never
    matters: the context is sorted before mixing.
    """
    v = stem_weight * _base_vector(stem, dim, seed)
    context = sorted(context_window)
    if context:
        mean = np.zeros(dim)
        for c in context:
            mean += _base_vector(c, dim, seed)
        v = v + context_weight * (mean / len(context))
    jitter = _hash_rng("jitter", stem, *context, seed=seed).standard_normal(dim)
    v = v + jitter_weight * (jitter / np.linalg.norm(jitter))
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return _base_vector(stem, dim, seed)
    return v / norm


class EmbeddingProvider(ABC):
    """Produces per-piece vectors with word spans for a token sequence."""

    dimension: int
    source: str

    #: Which token representation encode() expects: "stem" or "surface".
    prepares: str = "surface"

    @abstractmethod
    def encode(self, words: Sequence[str]) -> EncodedText:
        """Encode one text given as a list of words."""


class DeterministicTestProvider(EmbeddingProvider):
    """One piece per word; vectors from deterministic_test_embedder.

    The special-token vectors are embedded with the whole word list as
    context, mirroring how sequence-level tokens absorb global context.
    """

    source = "deterministic-test"
    prepares = "stem"

    def __init__(
        self,
        dim: int = 32,
        radius: int = 4,
        seed: int = 0,
        stem_weight: float = 0.35,
        context_weight: float = 0.60,
        jitter_weight: float = 0.05,
    ) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if radius < 0:
            raise ValueError(f"radius must be >= 0, got {radius}")
        self.dimension = dim
        self.radius = radius
        self.seed = seed
        self._weights = (stem_weight, context_weight, jitter_weight)

    def vector(self, stem: str, context_window: Sequence[str]) -> np.ndarray:
        sw, cw, jw = self._weights
        return deterministic_test_embedder(
            stem,
            context_window,
            dim=self.dimension,
            seed=self.seed,
            stem_weight=sw,
            context_weight=cw,
            jitter_weight=jw,
        )

    def context_of(self, words: Sequence[str], i: int) -> list[str]:
        lo = max(0, i - self.radius)
        return [w for j, w in enumerate(words[lo : i + self.radius + 1], start=lo) if j != i]

    def encode(self, words: Sequence[str]) -> EncodedText:
        words = list(words)
        rows = [self.vector(CLS_MARKER, words)]
        spans = []
        for i, word in enumerate(words):
            rows.append(self.vector(word, self.context_of(words, i)))
            spans.append((i + 1, i + 2))
        rows.append(self.vector(SEP_MARKER, words))
        return EncodedText(pieces=np.stack(rows), word_spans=tuple(spans))


class RemoteProvider(EmbeddingProvider):
    """HTTP client for the embedding service wire contract.

    Request:  POST {base_url}/embed with JSON {"texts": [[word, ...], ...]}
    Response: {"dim": int, "results": [{"pieces": [[...], ...],
               "word_spans": [[start, end], ...]}, ...]}

    One retry on transport failure, then the error propagates. The service
    enforces its own piece limit and answers oversized texts with an error
    payload naming the limit.
    """

    source = "remote"
    prepares = "surface"

    def __init__(self, base_url: str, timeout: float = 30.0, transport=None) -> None:
        import httpx

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self.dimension = int(self._post({"texts": []})["dim"])

    def _post(self, payload: dict) -> dict:
        import httpx

        url = f"{self.base_url}/embed"
        try:
            response = self._client.post(url, json=payload)
        except httpx.TransportError:
            response = self._client.post(url, json=payload)
        if response.status_code != 200:
            detail = response.text.strip()
            raise RuntimeError(f"embedding service error {response.status_code}: {detail}")
        return response.json()

    def encode(self, words: Sequence[str]) -> EncodedText:
        result = self._post({"texts": [list(words)]})["results"][0]
        pieces = np.asarray(result["pieces"], dtype=float)
        spans = tuple((int(s), int(e)) for s, e in result["word_spans"])
        return EncodedText(pieces=pieces, word_spans=spans)

    def close(self) -> None:
        self._client.close()
