"""Transformer encoding of word sequences into per-piece vectors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .errors import ExtractorError

__all__ = ["EncodedWords", "ModelSession"]


@dataclass(frozen=True)
class EncodedWords:
    """Hidden-state rows for one text, special tokens at rows 0 and -1.

    word_spans[i] is the half-open piece range of input word i; the ranges
    never cover the special rows.
    """

    pieces: np.ndarray
    word_spans: tuple[tuple[int, int], ...]


class ModelSession:
    """A loaded tokenizer and encoder pinned to one hidden-state layer.

    Layer numbering follows the model's hidden_states tuple: 0 is the
    embedding output and num_hidden_layers is the final layer, so the
    customary second-to-last BERT-Base layer is 11. Inference runs
    single-threaded so repeated extractions of one corpus agree bit for
    bit.
    """

    def __init__(self, model_path: str, layer: int = 11) -> None:
        self.tokenizer = AutoTokenizer.from_pretrained(model_path, use_fast=True)
        self.model = AutoModel.from_pretrained(model_path)
        torch.set_num_threads(1)
        self.model.eval()
        depth = self.model.config.num_hidden_layers
        if not 0 <= layer <= depth:
            raise ExtractorError(
                f"layer {layer} does not exist; this model exposes hidden "
                f"states 0 through {depth}"
            )
        self.layer = layer
        self.dim = int(self.model.config.hidden_size)
        self.max_model_pieces = int(
            getattr(self.model.config, "max_position_embeddings", 512)
        )
        self._piece_ids: dict[str, list[int]] = {}

    def piece_ids(self, word: str) -> list[int]:
        """WordPiece ids for one word, no specials; unknown words map to UNK."""
        cached = self._piece_ids.get(word)
        if cached is None:
            cached = self.tokenizer(word, add_special_tokens=False)["input_ids"]
            if not cached:
                cached = [self.tokenizer.unk_token_id]
            self._piece_ids[word] = cached
        return cached

    def piece_count(self, word: str) -> int:
        return len(self.piece_ids(word))

    def encode_batch(self, texts: Sequence[Sequence[str]]) -> list[EncodedWords]:
        """Encode word lists in one forward pass; output order matches input."""
        if not texts:
            return []
        cls_id = self.tokenizer.cls_token_id
        sep_id = self.tokenizer.sep_token_id
        pad_id = self.tokenizer.pad_token_id
        if pad_id is None:
            pad_id = 0
        rows: list[list[int]] = []
        spans: list[list[tuple[int, int]]] = []
        for words in texts:
            ids = [cls_id]
            text_spans: list[tuple[int, int]] = []
            for word in words:
                pieces = self.piece_ids(word)
                text_spans.append((len(ids), len(ids) + len(pieces)))
                ids.extend(pieces)
            ids.append(sep_id)
            if len(ids) > self.max_model_pieces:
                raise ExtractorError(
                    f"text needs {len(ids)} pieces but the model accepts at "
                    f"most {self.max_model_pieces}"
                )
            rows.append(ids)
            spans.append(text_spans)
        width = max(len(r) for r in rows)
        input_ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
        attention_mask = torch.zeros((len(rows), width), dtype=torch.long)
        for i, ids in enumerate(rows):
            input_ids[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention_mask[i, : len(ids)] = 1
        with torch.no_grad():
            output = self.model(
                input_ids=input_ids,
                attention_mask=attention_mask,
                output_hidden_states=True,
            )
        hidden = output.hidden_states[self.layer]
        out = []
        for i, ids in enumerate(rows):
            pieces = hidden[i, : len(ids)].numpy().astype(np.float32)
            out.append(EncodedWords(pieces=pieces, word_spans=tuple(spans[i])))
        return out
