"""Corpus-unit counts for sets of phrases.

Two interchangeable providers expose ``count(query)`` and ``total_units``:

* :class:`LocalCountProvider` counts documents of a local directory that
  contain every phrase of the query (multi-word phrases must match as a
  contiguous token run).
* :class:`WebCountProvider` asks a search endpoint for its hit count and
  persists every answer in a :class:`CountCache`.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Protocol
from urllib.parse import quote

import requests

from sanitext.normalize import TOKEN_RE, normalize_phrase, phrase_tokens

log = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    """A count could not be obtained; callers must abort rather than assume zero."""


@dataclass(frozen=True)
class PhraseQuery:
    phrases: frozenset[str]

    def __post_init__(self) -> None:
        if not self.phrases:
            raise ValueError("a phrase query needs at least one phrase")
        for p in self.phrases:
            if not p or p != normalize_phrase(p):
                raise ValueError(f"phrase {p!r} is empty or not normalized")

    @classmethod
    def of(cls, *phrases: str) -> PhraseQuery:
        return cls(frozenset(normalize_phrase(p) for p in phrases))

    @classmethod
    def trusted(cls, phrases: frozenset[str]) -> PhraseQuery:
        """Build from phrases the caller has already normalized; skips validation."""
        q = object.__new__(cls)
        object.__setattr__(q, "phrases", phrases)
        return q

    def __or__(self, other: PhraseQuery) -> PhraseQuery:
        return PhraseQuery.trusted(self.phrases | other.phrases)


def canonical_query(q: PhraseQuery) -> str:
    """Quoted phrases, sorted, joined with `` AND ``."""
    return " AND ".join(f'"{p}"' for p in sorted(q.phrases))


@dataclass(frozen=True)
class ProviderStats:
    total_units: int

    def __post_init__(self) -> None:
        if self.total_units < 1:
            raise ValueError("total_units must be >= 1")


class CountProvider(Protocol):
    stats: ProviderStats
    #: True when counts are exact document counts, so joints can be clamped to marginals
    exact: bool
    identity: str

    def count(self, q: PhraseQuery) -> int: ...

    def prefetch(self, queries: Iterable[PhraseQuery]) -> None: ...


@dataclass(frozen=True)
class CountCacheEntry:
    key: str
    count: int
    fetched_at: str


class CountCache:
    """Append-only tab-separated count cache; last write wins on reload.

    Each line is ``canonical_key<TAB>count<TAB>iso8601_timestamp``. Writes
    are serialized by a lock and flushed before :meth:`put` returns.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        # key -> (count, fetched_at)
        self._entries: dict[str, tuple[int, str]] = {}
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        entries = self._entries
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or not parts[1].isdigit():
                    if parts == [""]:
                        continue
                    raise ValueError(f"{self.path}:{lineno}: malformed cache record")
                entries[parts[0]] = (int(parts[1]), parts[2])

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> int | None:
        entry = self._entries.get(key)
        return None if entry is None else entry[0]

    def entries(self) -> list[CountCacheEntry]:
        return [CountCacheEntry(k, n, ts) for k, (n, ts) in self._entries.items()]

    def put(self, key: str, count: int) -> None:
        if "\t" in key or "\n" in key:
            raise ValueError(f"cache key {key!r} contains a separator")
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with self._lock:
            self._entries[key] = (count, stamp)
            if self.path is None:
                return
            if self._fh is None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = self.path.open("a", encoding="utf-8")
            self._fh.write(f"{key}\t{count}\t{stamp}\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def clear(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            self._entries.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()

    def __enter__(self) -> CountCache:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class LocalIndex:
    """Positional inverted index over a small document collection.

    Document sets are stored as integer bitmasks so that conjunctive counts
    reduce to ``&`` and ``int.bit_count``.
    """

    def __init__(self, documents: Sequence[str], names: Sequence[str] | None = None) -> None:
        self.names = list(names) if names is not None else [f"doc{i}" for i in range(len(documents))]
        self._tokens: list[list[str]] = [[m.group(0) for m in TOKEN_RE.finditer(d.lower())] for d in documents]
        self._postings: dict[str, int] = {}
        for i, toks in enumerate(self._tokens):
            bit = 1 << i
            for tok in set(toks):
                self._postings[tok] = self._postings.get(tok, 0) | bit
        self._phrase_masks: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_directory(cls, path: str | Path) -> LocalIndex:
        root = Path(path)
        if not root.is_dir():
            raise FileNotFoundError(f"corpus directory not found: {root}")
        files = sorted(p for p in root.iterdir() if p.is_file() and not p.name.startswith("."))
        return cls([p.read_text(encoding="utf-8") for p in files], [p.name for p in files])

    def __len__(self) -> int:
        return len(self._tokens)

    def phrase_mask(self, phrase: str) -> int:
        mask = self._phrase_masks.get(phrase)
        if mask is not None:
            return mask
        toks = phrase_tokens(phrase)
        if not toks:
            mask = 0
        else:
            mask = self._postings.get(toks[0], 0)
            for tok in toks[1:]:
                mask &= self._postings.get(tok, 0)
            if len(toks) > 1 and mask:
                mask = self._verify_contiguous(mask, toks)
        with self._lock:
            self._phrase_masks[phrase] = mask
        return mask

    def _verify_contiguous(self, mask: int, toks: tuple[str, ...]) -> int:
        out = 0
        n = len(toks)
        i = 0
        while mask:
            if mask & 1:
                doc = self._tokens[i]
                if any(tuple(doc[j : j + n]) == toks for j in range(len(doc) - n + 1)):
                    out |= 1 << i
            mask >>= 1
            i += 1
        return out

    def count(self, phrases: Iterable[str]) -> int:
        it = iter(phrases)
        mask = self.phrase_mask(next(it))
        for p in it:
            if not mask:
                break
            mask &= self.phrase_mask(p)
        return mask.bit_count()


class LocalCountProvider:
    """Exact document counts from a :class:`LocalIndex`, optionally through a persistent cache."""

    exact = True

    def __init__(self, index: LocalIndex, cache: CountCache | None = None, identity: str = "local") -> None:
        if len(index) < 1:
            raise ValueError("local corpus is empty")
        self.index = index
        self.cache = cache
        self.stats = ProviderStats(len(index))
        self.identity = identity
        self._memo: dict[frozenset[str], int] = {}

    @classmethod
    def from_directory(cls, path: str | Path, cache: CountCache | None = None) -> LocalCountProvider:
        return cls(LocalIndex.from_directory(path), cache, identity=f"local:{path}")

    def count(self, q: PhraseQuery) -> int:
        n = self._memo.get(q.phrases)
        if n is not None:
            return n
        if self.cache is None:
            n = self.index.count(q.phrases)
        else:
            key = canonical_query(q)
            n = self.cache.get(key)
            if n is None:
                n = self.index.count(q.phrases)
                self.cache.put(key, n)
        self._memo[q.phrases] = n
        return n

    def prefetch(self, queries: Iterable[PhraseQuery]) -> None:
        for q in queries:
            self.count(q)


def count_local(q: PhraseQuery, index: LocalIndex) -> int:
    return index.count(q.phrases)


@dataclass(frozen=True)
class WebEndpointConfig:
    """How to ask a search endpoint for a page count.

    ``url_template`` must contain ``{query}``; it may also contain
    ``{api_key}``. ``count_path`` is a dot-separated path into the JSON
    response body (integer list indices allowed). The API key is only ever
    read from the environment variable named by ``api_key_env``.
    """

    url_template: str
    count_path: str
    total_units: int
    api_key_env: str | None = None
    api_key_header: str | None = None
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 10.0
    workers: int = 4

    def __post_init__(self) -> None:
        if "{query}" not in self.url_template:
            raise ValueError("url_template must contain a {query} placeholder")
        if self.total_units < 1:
            raise ValueError("total_units (W) must be a positive integer")
        if self.max_retries < 0 or self.backoff_base < 0:
            raise ValueError("max_retries and backoff_base must be non-negative")

    @classmethod
    def from_file(cls, path: str | Path) -> WebEndpointConfig:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "total_units" not in data:
            raise ValueError(f"{path}: total_units (W) is required for the web provider")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown config fields {sorted(unknown)}")
        return cls(**data)


def extract_count(body: Any, path: str) -> int:
    node = body
    for part in path.split("."):
        if isinstance(node, list) and part.lstrip("-").isdigit():
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ProviderError(f"response has no field {path!r}")
    if isinstance(node, bool):
        raise ProviderError(f"count field {path!r} is not an integer")
    if isinstance(node, str) and node.replace(",", "").isdigit():
        node = int(node.replace(",", ""))
    if not isinstance(node, int) or node < 0:
        raise ProviderError(f"count field {path!r} is not a non-negative integer: {node!r}")
    return node


class WebCountProvider:
    """Page counts from a search endpoint, cached on disk.

    Counts are used raw: search engines return estimates, so no
    anti-monotonicity is assumed.
    """

    exact = False

    def __init__(
        self,
        config: WebEndpointConfig,
        cache: CountCache,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self.config = config
        self.cache = cache
        self.stats = ProviderStats(config.total_units)
        self.identity = f"web:{config.url_template}"
        self.requests_made = 0
        self._session = session or requests.Session()
        self._sleep = sleep
        self._counter_lock = threading.Lock()
        self._api_key = None
        if config.api_key_env:
            self._api_key = os.environ.get(config.api_key_env)
            if self._api_key is None:
                raise ProviderError(f"environment variable {config.api_key_env} is not set")

    def _url(self, key: str) -> str:
        fields = {"query": quote(key, safe="")}
        if "{api_key}" in self.config.url_template:
            fields["api_key"] = quote(self._api_key or "", safe="")
        return self.config.url_template.format(**fields)

    def _fetch(self, key: str) -> int:
        headers = {}
        if self.config.api_key_header and self._api_key:
            headers[self.config.api_key_header] = self._api_key
        url = self._url(key)
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            with self._counter_lock:
                self.requests_made += 1
            try:
                resp = self._session.get(url, headers=headers, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("count request for %s failed: %s", key, last_error)
                continue
            if resp.status_code == 429:
                last_error = "rate limited (HTTP 429)"
                log.warning("rate limited on %s, backing off", key)
                continue
            if resp.status_code >= 400:
                last_error = f"HTTP {resp.status_code}"
                log.warning("count request for %s returned %s", key, last_error)
                continue
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProviderError(f"malformed response for {key}: {exc}") from exc
            return extract_count(body, self.config.count_path)
        raise ProviderError(
            f"giving up on {key} after {self.config.max_retries + 1} attempts ({last_error})"
        )

    def count(self, q: PhraseQuery) -> int:
        key = canonical_query(q)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        n = self._fetch(key)
        self.cache.put(key, n)
        return n

    def prefetch(self, queries: Iterable[PhraseQuery]) -> None:
        """Fetch missing counts concurrently; cache writes keep input order."""
        keys = list(dict.fromkeys(canonical_query(q) for q in queries))
        missing = [k for k in keys if k not in self.cache]
        if not missing:
            return
        with ThreadPoolExecutor(max_workers=max(1, self.config.workers)) as pool:
            futures = [pool.submit(self._fetch, k) for k in missing]
            results = [f.result() for f in futures]
        for k, n in zip(missing, results):
            self.cache.put(k, n)


def count_web(q: PhraseQuery, provider: WebCountProvider) -> int:
    return provider.count(q)
