"""Error types shared across the extractor."""


class ExtractorError(Exception):
    """Base class for user-facing extraction failures."""


class PlanFormatError(ExtractorError):
    """A tokenization plan line violates the expected layout."""
