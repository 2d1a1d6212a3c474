"""Text analysis pipeline: tokenization, stopword flagging, stemming.

Stopwords are flagged rather than deleted so token positions stay aligned
with the mention extraction step; downstream scoring and candidate
generation skip flagged tokens.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigurationError

__all__ = [
    "STOPWORDS",
    "Token",
    "kstem",
    "porter_stem",
    "resolve_stemmer",
    "tokenize",
]


@dataclass(frozen=True)
class Token:
    """One corpus token. Positions are strictly increasing within a document."""

    surface: str
    stem: str
    position: int
    is_stopword: bool


# Standard English function-word list in the spirit of the InQuery/Galago
# lists. Membership is checked against the lowercased surface form.
STOPWORDS: frozenset[str] = frozenset("""
a about above across after again against all almost also although always am
among an and another any anybody anyone anything anywhere are around as at
be became because become becomes been before being below between beyond both
but by came can cannot come could did do does doing done down during each
either else enough etc even ever every everybody everyone everything
everywhere few for from further get gets give given go goes got had has have
having he hence her here hers herself him himself his how however i if in
indeed instead into is it its itself just least less let like likely made
make many may maybe me meanwhile might mine more moreover most much must my
myself neither never nevertheless no nobody none nor not nothing now
nowhere of off often on once one only onto or other others otherwise our
ours ourselves out over own per perhaps rather said same say says she should
since so some somebody someone something somewhere still such than that the
their theirs them themselves then there therefore these they this those
through throughout thus to together too toward towards under until unto up
upon us very was we well were what whatever when whenever where whereas
wherever whether which while who whoever whom whose why will with within
without would yes yet you your yours yourself yourselves
""".split())


_VOWELS = "aeiouy"

_KSTEM_EXCEPTIONS = {
    "men": "man",
    "women": "woman",
    "children": "child",
    "feet": "foot",
    "teeth": "tooth",
    "mice": "mouse",
    "geese": "goose",
    "oxen": "ox",
    "news": "news",
    "series": "series",
    "species": "species",
    "goes": "go",
    "does": "do",
    "shoes": "shoe",
    "was": "was",
    "has": "has",
    "his": "his",
    "during": "during",
    "morning": "morning",
    "evening": "evening",
    "anything": "anything",
    "everything": "everything",
    "nothing": "nothing",
    "something": "something",
}

_UNDOUBLE = frozenset("bdgmnprt")


def _undouble(word: str) -> str:
    if len(word) >= 3 and word[-1] == word[-2] and word[-1] in _UNDOUBLE:
        return word[:-1]
    return word


def kstem(word: str) -> str:
    """Lightweight inflectional stemmer: plural, past-tense and -ing suffixes.

    Modeled on Krovetz's inflectional step but dictionary-free, so it
    diverges from the original in known ways: no silent-e restoration
    ("named" -> "nam"), -eed forms left alone ("agreed" stays), and only a
    small irregular table. The rules are deterministic and applied
    identically at index, query and mention-extraction time, which is the
    property retrieval actually depends on.
    """
    if len(word) < 3 or not word.isalpha():
        return word
    hit = _KSTEM_EXCEPTIONS.get(word)
    if hit is not None:
        return hit

    stem = word
    # Plural suffixes.
    if stem.endswith("ies"):
        stem = stem[:-3] + "y" if len(stem) > 4 else stem[:-1]
    elif stem.endswith("sses"):
        stem = stem[:-2]
    elif stem.endswith(("xes", "ches", "shes", "zes", "oes")) and len(stem) > 4:
        stem = stem[:-2]
    elif stem.endswith(("ss", "us", "is")):
        pass
    elif stem.endswith("s") and len(stem) > 3:
        stem = stem[:-1]

    # Past-tense suffixes.
    if stem.endswith("ied"):
        stem = stem[:-3] + "y" if len(stem) > 4 else stem[:-1]
    elif stem.endswith("eed"):
        pass
    elif stem.endswith("ed") and len(stem) > 4:
        stem = _undouble(stem[:-2])

    # Progressive suffix. The base must keep a vowel so forms like "thing"
    # and "string" survive intact.
    if stem.endswith("ing") and len(stem) > 5:
        base = stem[:-3]
        if len(base) >= 3 and any(v in base for v in _VOWELS):
            stem = _undouble(base)

    return stem if len(stem) >= 2 else word


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in "aeiou":
        return False
    if c == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(word: str) -> int:
    m = 0
    seen_vowel = False
    for i in range(len(word)):
        if _is_consonant(word, i):
            if seen_vowel:
                m += 1
                seen_vowel = False
        else:
            seen_vowel = True
    return m


def _has_vowel(word: str) -> bool:
    return any(not _is_consonant(word, i) for i in range(len(word)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


_PORTER_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_PORTER_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_PORTER_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def porter_stem(word: str) -> str:
    """Classic Porter algorithm, offered as the comparison stemmer.

    Straight transcription of the published rule list (steps 1a through 5b
    with the m-measure); no Porter2 refinements.
    """
    if len(word) <= 2 or not word.isalpha():
        return word
    w = word

    # Step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif w.endswith("ss"):
        pass
    elif w.endswith("s"):
        w = w[:-1]

    # Step 1b
    flag_1b = False
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    elif w.endswith("ed") and _has_vowel(w[:-2]):
        w = w[:-2]
        flag_1b = True
    elif w.endswith("ing") and _has_vowel(w[:-3]):
        w = w[:-3]
        flag_1b = True
    if flag_1b:
        if w.endswith(("at", "bl", "iz")):
            w = w + "e"
        elif _ends_double_consonant(w) and not w.endswith(("l", "s", "z")):
            w = w[:-1]
        elif _measure(w) == 1 and _ends_cvc(w):
            w = w + "e"

    # Step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # Step 2
    for suffix, repl in _PORTER_STEP2:
        if w.endswith(suffix):
            base = w[: -len(suffix)]
            if _measure(base) > 0:
                w = base + repl
            break

    # Step 3
    for suffix, repl in _PORTER_STEP3:
        if w.endswith(suffix):
            base = w[: -len(suffix)]
            if _measure(base) > 0:
                w = base + repl
            break

    # Step 4
    for suffix in _PORTER_STEP4:
        if w.endswith(suffix):
            base = w[: -len(suffix)]
            if suffix == "ion" and not base.endswith(("s", "t")):
                break
            if _measure(base) > 1:
                w = base
            break

    # Step 5a
    if w.endswith("e"):
        m = _measure(w[:-1])
        if m > 1 or (m == 1 and not _ends_cvc(w[:-1])):
            w = w[:-1]

    # Step 5b
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]

    return w


_STEMMERS: dict[str, Callable[[str], str]] = {
    "kstem": kstem,
    "porter": porter_stem,
    "none": lambda w: w,
}


def resolve_stemmer(stemmer_id: str) -> Callable[[str], str]:
    try:
        return _STEMMERS[stemmer_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown stemmer {stemmer_id!r}; choose from {sorted(_STEMMERS)}"
        ) from None


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(
    text: str,
    stopword_list: frozenset[str] = STOPWORDS,
    stemmer_id: str = "kstem",
) -> list[Token]:
    """Lowercase, split on non-alphanumeric runs, flag stopwords, stem.

    Stopwords are flagged in place; positions number the surviving tokens
    consecutively from 0 so every pipeline stage sees the same coordinates.
    """
    stem = resolve_stemmer(stemmer_id)
    tokens: list[Token] = []
    for position, match in enumerate(_WORD_RE.finditer(text.lower())):
        surface = match.group()
        tokens.append(
            Token(
                surface=surface,
                stem=stem(surface),
                position=position,
                is_stopword=surface in stopword_list,
            )
        )
    return tokens
