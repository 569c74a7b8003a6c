"""Context splitting, lexicon-driven term extraction and span replacement."""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from sanitext.normalize import TOKEN_RE, normalize_phrase, phrase_tokens
from sanitext.taxonomy import Taxonomy

DEFAULT_MARKER = "[REDACTED]"
DEFAULT_MIN_OOV_LENGTH = 3

_PARAGRAPH_BREAK = re.compile(r"\n[ \t\r\f\v]*\n\s*")
_SENTENCE_BREAK = re.compile(r"(?<=[.?!])\s+")


class OverlapError(ValueError):
    """Two replacement spans overlap."""


@dataclass(frozen=True)
class ContextMode:
    kind: str = "whole"
    window: int = 0

    KINDS = ("whole", "paragraph", "sentence", "window")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown context mode {self.kind!r}")
        if self.kind == "window" and self.window < 1:
            raise ValueError("window mode needs k >= 1")

    @classmethod
    def parse(cls, spec: str) -> ContextMode:
        """``whole``, ``paragraph``, ``sentence`` or ``window:K``."""
        kind, _, k = spec.partition(":")
        if kind == "window":
            if not k.isdigit():
                raise ValueError(f"window mode needs a token count, got {spec!r}")
            return cls("window", int(k))
        if k:
            raise ValueError(f"unexpected argument in context mode {spec!r}")
        return cls(kind)

    def __str__(self) -> str:
        return f"window:{self.window}" if self.kind == "window" else self.kind


@dataclass
class TermOccurrence:
    surface: str
    span: tuple[int, int]
    concept: str | None = None
    #: replacement concept, SUPPRESSED, or None when untouched
    current_replacement: object = None

    @property
    def key(self) -> str:
        """Normalized surface; the phrase used for corpus queries."""
        return " ".join(phrase_tokens(self.surface))


@dataclass
class Context:
    id: int
    span: tuple[int, int]
    terms: list[TermOccurrence] = field(default_factory=list)


@dataclass
class Document:
    raw_text: str
    contexts: list[Context]

    @classmethod
    def parse(
        cls,
        raw_text: str,
        tax: Taxonomy,
        mode: ContextMode | str = "whole",
        stopwords: Iterable[str] | None = None,
        min_oov_length: int | None = DEFAULT_MIN_OOV_LENGTH,
    ) -> Document:
        if isinstance(mode, str):
            mode = ContextMode.parse(mode)
        stop = default_stopwords() if stopwords is None else frozenset(stopwords)
        contexts = []
        for ctx in split_contexts(raw_text, mode):
            start, end = ctx.span
            ctx.terms = extract_terms(raw_text[start:end], tax, stop, min_oov_length, offset=start)
            contexts.append(ctx)
        return cls(raw_text, contexts)

    @property
    def terms(self) -> list[TermOccurrence]:
        return [t for c in self.contexts for t in c.terms]


def default_stopwords() -> frozenset[str]:
    text = resources.files("sanitext").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return parse_stopwords(text)


def parse_stopwords(text: str) -> frozenset[str]:
    return frozenset(
        normalize_phrase(line) for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def load_stopwords(path: str | Path) -> frozenset[str]:
    return parse_stopwords(Path(path).read_text(encoding="utf-8"))


def _chunks(text: str, separator: re.Pattern[str]) -> list[tuple[int, int]]:
    spans = []
    pos = 0
    for m in separator.finditer(text):
        spans.append((pos, m.start()))
        pos = m.end()
    spans.append((pos, len(text)))
    out = []
    for s, e in spans:
        # trim surrounding whitespace, drop empty chunks
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            out.append((s, e))
    return out


def split_contexts(raw_text: str, mode: ContextMode | str = "whole") -> list[Context]:
    """Non-overlapping context spans over ``raw_text`` in document order."""
    if isinstance(mode, str):
        mode = ContextMode.parse(mode)
    if mode.kind == "whole":
        spans = [(0, len(raw_text))] if raw_text.strip() else []
    elif mode.kind == "paragraph":
        spans = _chunks(raw_text, _PARAGRAPH_BREAK)
    elif mode.kind == "sentence":
        spans = _chunks(raw_text, _SENTENCE_BREAK)
    else:
        toks = [m.span() for m in TOKEN_RE.finditer(raw_text)]
        spans = [
            (toks[i][0], toks[min(i + mode.window, len(toks)) - 1][1])
            for i in range(0, len(toks), mode.window)
        ]
    return [Context(i, span) for i, span in enumerate(spans)]


def extract_terms(
    text: str,
    tax: Taxonomy,
    stopwords: Iterable[str] = frozenset(),
    min_oov_length: int | None = DEFAULT_MIN_OOV_LENGTH,
    offset: int = 0,
) -> list[TermOccurrence]:
    """Greedy left-to-right longest match against the taxonomy lexicon.

    Tokens not covered by a lexicon match become out-of-vocabulary terms when
    they are not stopwords and have at least ``min_oov_length`` characters;
    ``min_oov_length=None`` disables OOV terms altogether.
    """
    table, longest = tax.token_lexicon
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else frozenset(stopwords)
    toks = list(TOKEN_RE.finditer(text))
    words = [m.group(0).lower() for m in toks]
    out: list[TermOccurrence] = []
    i = 0
    while i < len(toks):
        for n in range(min(longest, len(toks) - i), 0, -1):
            concept = table.get(tuple(words[i : i + n]))
            if concept is not None:
                s, e = toks[i].start(), toks[i + n - 1].end()
                out.append(TermOccurrence(text[s:e], (s + offset, e + offset), concept))
                i += n
                break
        else:
            w = words[i]
            if min_oov_length is not None and w not in stop and len(w) >= min_oov_length:
                s, e = toks[i].span()
                out.append(TermOccurrence(text[s:e], (s + offset, e + offset), None))
            i += 1
    return out


def apply_replacements(raw_text: str, table: Mapping[tuple[int, int], str]) -> str:
    """Substitute each ``(start, end)`` span with its replacement text."""
    pieces = []
    pos = 0
    for (s, e), replacement in sorted(table.items()):
        if s < pos:
            raise OverlapError(f"replacement span {(s, e)} overlaps a previous span")
        if not 0 <= s <= e <= len(raw_text):
            raise OverlapError(f"replacement span {(s, e)} is outside the text")
        pieces.append(raw_text[pos:s])
        pieces.append(replacement)
        pos = e
    pieces.append(raw_text[pos:])
    return "".join(pieces)
