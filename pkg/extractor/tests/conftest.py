"""Shared fixture: a tiny randomly-initialized BERT saved to disk.

The vocabulary is hand-built so specific behaviors are guaranteed:
"riverbank" splits into two pieces, repeating "ab" makes a word of any
piece count for truncation tests, and anything else falls to [UNK]. The
weights are random but seeded, so every test run sees the same model.
"""
from __future__ import annotations

import pytest
import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, BertTokenizerFast

from ceqe_extractor.encoder import ModelSession

VOCAB = [
    "[PAD]",
    "[UNK]",
    "[CLS]",
    "[SEP]",
    "[MASK]",
    "the",
    "a",
    "of",
    "at",
    "river",
    "water",
    "flow",
    "bank",
    "rock",
    "storm",
    "deposit",
    "money",
    "credit",
    "rain",
    "cloud",
    "sky",
    "apple",
    "orange",
    "##bank",
    "ab",
    "##ab",
]

HIDDEN = 32
LAYERS = 4
MAX_POSITIONS = 64


def _build_tokenizer() -> BertTokenizerFast:
    table = {word: i for i, word in enumerate(VOCAB)}
    core = Tokenizer(
        models.WordPiece(vocab=table, unk_token="[UNK]", max_input_chars_per_word=100)
    )
    core.normalizer = normalizers.BertNormalizer(lowercase=True)
    core.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    core.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", table["[CLS]"]), ("[SEP]", table["[SEP]"])],
    )
    return BertTokenizerFast(
        tokenizer_object=core, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tinybert")
    _build_tokenizer().save_pretrained(path)
    torch.manual_seed(7)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=HIDDEN,
        num_hidden_layers=LAYERS,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=MAX_POSITIONS,
    )
    BertModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def model_session(model_dir) -> ModelSession:
    return ModelSession(model_dir, layer=3)
