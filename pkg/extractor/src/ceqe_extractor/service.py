"""HTTP embedding service speaking the retrieval package's wire protocol.

POST /embed with {"texts": [[word, ...], ...]} answers
{"dim": int, "results": [{"pieces": [[...], ...],
"word_spans": [[start, end], ...]}, ...]} in input order. An empty texts
list is the dimension handshake. A text whose pieces would not fit the
service's chunk budget gets a 413 naming the limit instead of a silent
clip, since the caller owns chunking.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .encoder import ModelSession
from .errors import ExtractorError

__all__ = ["EmbedRequest", "create_app"]


class EmbedRequest(BaseModel):
    texts: list[list[str]]


def create_app(session: ModelSession, max_pieces: int = 128) -> FastAPI:
    if max_pieces < 2:
        raise ExtractorError(f"max_pieces must be >= 2, got {max_pieces}")
    if max_pieces > session.max_model_pieces:
        raise ExtractorError(
            f"max_pieces {max_pieces} exceeds the model's position limit "
            f"{session.max_model_pieces}"
        )
    app = FastAPI(title="contextualized embedding service")

    @app.post("/embed")
    def embed(request: EmbedRequest) -> dict:
        for i, words in enumerate(request.texts):
            total = sum(session.piece_count(w) for w in words) + 2
            if total > max_pieces:
                raise HTTPException(
                    status_code=413,
                    detail=f"text {i} needs {total} pieces, limit is {max_pieces}",
                )
        results = [
            {
                "pieces": encoded.pieces.tolist(),
                "word_spans": [[lo, hi] for lo, hi in encoded.word_spans],
            }
            for encoded in session.encode_batch([list(t) for t in request.texts])
        ]
        return {"dim": session.dim, "results": results}

    return app
