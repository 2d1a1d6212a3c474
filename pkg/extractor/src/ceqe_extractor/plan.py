"""Tokenization plans: the handoff format from the retrieval package.

A plan is the TSV emitted by ``ceqe extract-plan``: one line per token,
``doc_id<TAB>position<TAB>surface<TAB>stem<TAB>stopword_flag``, tokens of a
document contiguous and positioned consecutively from zero. The plan
carries every text-analysis decision (lowercasing, stemming, stopword
flagging) so this package never re-implements those rules and cannot
drift from the index it feeds.
"""
from __future__ import annotations

import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import ExtractorError, PlanFormatError

__all__ = ["PlanToken", "PlanDoc", "parse_plan", "plan_from_corpus"]


@dataclass(frozen=True)
class PlanToken:
    position: int
    surface: str
    stem: str
    is_stopword: bool


@dataclass(frozen=True)
class PlanDoc:
    doc_id: str
    tokens: tuple[PlanToken, ...]


def parse_plan(text: str) -> list[PlanDoc]:
    """Parse plan lines into per-document token sequences, preserving order."""
    docs: list[PlanDoc] = []
    finished: set[str] = set()
    current_id: str | None = None
    current: list[PlanToken] = []

    def close() -> None:
        nonlocal current_id, current
        if current_id is not None:
            docs.append(PlanDoc(doc_id=current_id, tokens=tuple(current)))
            finished.add(current_id)
        current_id = None
        current = []

    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise PlanFormatError(
                f"plan line {number}: expected 5 tab-separated fields, got {len(parts)}"
            )
        doc_id, position_s, surface, stem, flag_s = parts
        try:
            position = int(position_s)
        except ValueError:
            raise PlanFormatError(
                f"plan line {number}: position {position_s!r} not an integer"
            ) from None
        if flag_s not in ("0", "1"):
            raise PlanFormatError(
                f"plan line {number}: stopword flag must be 0 or 1, got {flag_s!r}"
            )
        if not doc_id or not surface or not stem:
            raise PlanFormatError(f"plan line {number}: empty field")
        if doc_id != current_id:
            if doc_id in finished:
                raise PlanFormatError(
                    f"plan line {number}: document {doc_id!r} appears in two blocks"
                )
            close()
            current_id = doc_id
        if position != len(current):
            raise PlanFormatError(
                f"plan line {number}: position {position} for {doc_id!r}, "
                f"expected {len(current)}"
            )
        current.append(
            PlanToken(
                position=position, surface=surface, stem=stem,
                is_stopword=flag_s == "1",
            )
        )
    close()
    return docs


def plan_from_corpus(corpus_path: str | Path, stemmer: str = "kstem") -> str:
    """Tokenize a corpus by invoking the retrieval package's CLI.

    Requires the ``ceqe`` command on PATH; the subprocess boundary is the
    supported way to share tokenization rules between the two packages.
    """
    exe = shutil.which("ceqe")
    if exe is None:
        raise ExtractorError(
            "the `ceqe` command is not on PATH; install the retrieval package "
            "or pass a plan file produced by `ceqe extract-plan`"
        )
    proc = subprocess.run(
        [exe, "extract-plan", "--corpus", str(corpus_path), "--stemmer", stemmer],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise ExtractorError(
            f"`ceqe extract-plan` failed with exit code {proc.returncode}: "
            f"{proc.stderr.strip()}"
        )
    return proc.stdout
