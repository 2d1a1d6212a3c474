import pytest

from ceqe.corpus import Document
from ceqe.index import Index
from ceqe.text import Token


def make_tokens(text: str, stopwords: frozenset[str] = frozenset()) -> tuple[Token, ...]:
    """Tokens with stem == surface, so fixtures control the vocabulary."""
    return tuple(
        Token(surface=w, stem=w, position=i, is_stopword=w in stopwords)
        for i, w in enumerate(text.split())
    )


def make_document(doc_id: str, text: str, stopwords: frozenset[str] = frozenset()) -> Document:
    return Document(doc_id=doc_id, raw_text=text, tokens=make_tokens(text, stopwords))


@pytest.fixture
def abc_documents() -> list[Document]:
    """Three tiny docs over the vocabulary {a, b, c}; avgdl = 3.0."""
    return [
        make_document("d1", "a a b"),
        make_document("d2", "a c"),
        make_document("d3", "b b c c"),
    ]


@pytest.fixture
def abc_index(abc_documents) -> Index:
    return Index.build(abc_documents)
