"""Surface-form normalization shared by the lexicon, the corpus index and term extraction."""

from __future__ import annotations

import re

TOKEN_RE = re.compile(r"\w+(?:[-']\w+)*")


def normalize_phrase(text: str) -> str:
    """Lowercase, trim and collapse internal whitespace to single spaces."""
    return " ".join(text.lower().split())


def phrase_tokens(text: str) -> tuple[str, ...]:
    """Token sequence of a phrase, using the same tokenizer as documents."""
    return tuple(m.group(0) for m in TOKEN_RE.finditer(text.lower()))
