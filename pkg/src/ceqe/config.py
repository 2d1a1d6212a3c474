"""Experiment configuration: a flat key = value file plus flag overrides.

The file format is a subset of TOML: one `key = value` pair per line,
`#` comments, optional quoting for strings, and section headers ignored.
Flags always win over file values so a config file records the defaults
of an experiment while the command line varies one thing at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .errors import ConfigurationError

__all__ = ["Config", "parse_config_file", "load_config"]

_BOOL_WORDS = {"true": True, "false": False}


@dataclass
class Config:
    # asset paths
    corpus: str | None = None
    index: str | None = None
    store: str | None = None
    static_vectors: str | None = None
    qrels: str | None = None
    topics: str | None = None
    folds_file: str | None = None
    query_embeddings: str | None = None
    output: str | None = None

    # tokenization
    stemmer: str = "kstem"

    # retrieval
    b: float = 0.75
    k1: float = 1.2
    mu: float = 1500.0
    k: int = 1000

    # feedback
    fb_docs: int = 10
    fb_terms: int = 20
    fb_lambda: float = 0.5

    # candidate filter
    filter_stopwords: bool = True
    filter_min_length: int = 2
    filter_digits: bool = True

    # embedding provider
    provider: str = "deterministic-test"
    dim: int = 32
    radius: int = 4
    embed_seed: int = 0
    max_pieces: int = 128
    remote_url: str | None = None
    remote_timeout: float = 30.0

    # experiment control
    method: str = "bm25"
    seed: int = 0
    folds: int = 5
    tag: str | None = None
    static_scope: str = "global"

    def require(self, name: str, hint: str | None = None) -> str:
        value = getattr(self, name)
        if value is None:
            message = f"config key {name!r} is required"
            if hint:
                message += f" ({hint})"
            raise ConfigurationError(message)
        return value

    def require_path(self, name: str, hint: str | None = None) -> Path:
        path = Path(self.require(name, hint))
        if not path.exists():
            raise ConfigurationError(f"{name} path does not exist: {path}")
        return path


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(key: str, raw: str) -> object:
    declared = _FIELD_TYPES[key]
    text = raw.strip()
    if text and text[0] in "\"'" and text[-1] == text[0] and len(text) >= 2:
        return text[1:-1]
    if declared in ("bool",):
        word = text.lower()
        if word not in _BOOL_WORDS:
            raise ConfigurationError(f"key {key!r}: expected true/false, got {raw!r}")
        return _BOOL_WORDS[word]
    if declared in ("int",):
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"key {key!r}: expected an integer, got {raw!r}") from None
    if declared in ("float",):
        try:
            return float(text)
        except ValueError:
            raise ConfigurationError(f"key {key!r}: expected a number, got {raw!r}") from None
    return text


def parse_config_file(path: str | Path) -> dict[str, object]:
    """Read key = value pairs, reporting unknown keys with line numbers."""
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                continue
            if "=" not in stripped:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def load_config(path: str | Path | None = None, overrides: Mapping[str, object] | None = None) -> Config:
    """Build a Config from an optional file and flag overrides; flags win."""
    values: dict[str, object] = {}
    if path is not None:
        values.update(parse_config_file(path))
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"unknown config key {key!r}")
            values[key] = value
    return Config(**values)
