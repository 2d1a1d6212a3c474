"""Shared exception types."""


class ConfigurationError(ValueError):
    """Raised for invalid configuration values (unknown stemmer, bad ranges, missing paths)."""


class CorpusFormatError(ValueError):
    """Raised when a corpus stream violates its declared format."""


class RunFormatError(ValueError):
    """Raised when a TREC run or qrels file is malformed."""


class UnknownDocumentError(KeyError):
    """Raised when a doc_id is not present in an index or mention store.

    Distinct from an empty lookup result: asking for mentions of a stem that
    never occurs in a known document returns an empty list instead.
    """
