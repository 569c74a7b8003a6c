"""Risk assessment and greedy generalization of disclosive terms.

A term set ``T`` is risky for a policy entry ``(c, g)`` when its PMI with
``c`` exceeds the information content of ``g``. Plain entries (no ``g``)
only forbid full disclosure: ``T`` is risky when its PMI reaches ``IC(c)``.

The greedy pass analyses each context by increasing group size and, within
a size, by decreasing term informativeness. Risky groups are rewritten with
the most informative tuple of generalizations that is safe for every entry.
Sweeps repeat until one completes without a rewrite, so every combination
of the surviving surfaces (up to the configured size) has been checked
against its final form.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path

from sanitext.corpus import CountProvider, PhraseQuery, ProviderError
from sanitext.measures import ic_ratio, pmi_ratio_from_counts, to_bits
from sanitext.normalize import normalize_phrase
from sanitext.taxonomy import Taxonomy
from sanitext.textproc import (
    DEFAULT_MARKER,
    DEFAULT_MIN_OOV_LENGTH,
    ContextMode,
    Document,
    apply_replacements,
)

log = logging.getLogger(__name__)


class _Suppressed:
    _instance = None

    def __new__(cls) -> _Suppressed:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SUPPRESSED"


SUPPRESSED = _Suppressed()


class PolicyError(ValueError):
    pass


class SanitizationAborted(RuntimeError):
    """A count provider failed mid-run; ``report`` holds the decisions made so far."""

    def __init__(self, message: str, report: SanitizationReport) -> None:
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class PolicyEntry:
    entity: str
    generalization: str | None = None

    @property
    def generalized(self) -> bool:
        return self.generalization is not None


@dataclass(frozen=True)
class ProtectionPolicy:
    entries: tuple[PolicyEntry, ...]
    contextualize: bool = False

    def __post_init__(self) -> None:
        if not self.entries:
            raise PolicyError("policy has no entries")
        entities = [e.entity for e in self.entries]
        if len(set(entities)) != len(entities):
            raise PolicyError("policy entities must be distinct")
        if self.contextualize and not all(e.generalized for e in self.entries):
            raise PolicyError("contextualized probabilities need a generalization for every entity")

    @property
    def generalized(self) -> bool:
        return all(e.generalized for e in self.entries)

    def check_taxonomy(self, tax: Taxonomy) -> None:
        for e in self.entries:
            if e.generalized and e.entity in tax and e.generalization in tax:
                if not tax.is_hypernym(tax.resolve(e.generalization), e.entity):
                    raise PolicyError(f"{e.generalization!r} does not generalize {e.entity!r}")

    def to_text(self) -> str:
        return "".join(
            f"{e.entity}\t{e.generalization}\n" if e.generalized else f"{e.entity}\n" for e in self.entries
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def parse_policy(text: str, contextualize: bool = False) -> ProtectionPolicy:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = [normalize_phrase(f) for f in raw.split("\t")]
        if len(fields) == 1 and fields[0]:
            entries.append(PolicyEntry(fields[0]))
        elif len(fields) == 2 and all(fields):
            entries.append(PolicyEntry(fields[0], fields[1]))
        else:
            raise PolicyError(f"line {lineno}: malformed policy entry {raw!r}")
    return ProtectionPolicy(tuple(entries), contextualize)


def load_policy(path: str | Path, contextualize: bool = False) -> ProtectionPolicy:
    return parse_policy(Path(path).read_text(encoding="utf-8"), contextualize)


@dataclass(frozen=True)
class SanitizerConfig:
    max_cardinality: int = 1
    context_mode: ContextMode = field(default_factory=ContextMode)
    marker: str = DEFAULT_MARKER
    min_oov_length: int | None = DEFAULT_MIN_OOV_LENGTH
    stopwords: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.max_cardinality < 1:
            raise ValueError("max_cardinality must be >= 1")

    def describe(self) -> dict:
        return {
            "max_cardinality": self.max_cardinality,
            "context_mode": str(self.context_mode),
            "suppression_marker": self.marker,
            "min_oov_length": self.min_oov_length,
        }


@dataclass(frozen=True)
class Evidence:
    entity: str
    pmi: float
    threshold: float


@dataclass
class Replacement:
    context_id: int
    original: list[str]
    replacement: list[str]
    cardinality: int
    entity: str
    pmi: float
    threshold: float


@dataclass
class SanitizationReport:
    replacements: list[Replacement] = field(default_factory=list)
    residual_risk_flags: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "replacements": [asdict(r) for r in self.replacements],
            "residual_risk_flags": list(self.residual_risk_flags),
        }


class RiskModel:
    """Policy predicates over a frozen count provider, memoized per surface set."""

    def __init__(self, policy: ProtectionPolicy, provider: CountProvider, tax: Taxonomy | None = None) -> None:
        self.policy = policy
        self.provider = provider
        self.tax = tax
        self._ic: dict[str, Fraction] = {}
        self._marginal: dict[str, int] = {}
        self._pmi: dict[tuple[int, frozenset[str]], Fraction | None] = {}
        self._slot = {e: i for i, e in enumerate(policy.entries)}
        self._thresholds = {e: self.threshold_ratio(e) for e in policy.entries}
        self._anchors = {}
        for e in policy.entries:
            phrases = {e.entity} if not policy.contextualize else {e.entity, e.generalization}
            anchor = PhraseQuery.of(*phrases)
            self._anchors[e] = (anchor.phrases, provider.count(anchor))

    def ic_ratio(self, surface: str) -> Fraction:
        r = self._ic.get(surface)
        if r is None:
            r = self._ic[surface] = ic_ratio(surface, self.provider)
        return r

    def _marginal_count(self, surface: str) -> int:
        n = self._marginal.get(surface)
        if n is None:
            n = self._marginal[surface] = self.provider.count(PhraseQuery.of(surface))
        return n

    def ic(self, surface: str) -> float:
        return to_bits(self.ic_ratio(surface))

    def threshold_ratio(self, entry: PolicyEntry) -> Fraction:
        return self.ic_ratio(entry.generalization if entry.generalized else entry.entity)

    def pmi_ratio(self, entry: PolicyEntry, terms: frozenset[str]) -> Fraction | None:
        """Exact PMI ratio of ``terms`` (normalized surfaces) with the entry's entity."""
        key = (self._slot[entry], terms)
        if key not in self._pmi:
            anchor, anchor_n = self._anchors[entry]
            joint = self.provider.count(PhraseQuery.trusted(anchor | terms))
            marginals = [self._marginal_count(t) for t in sorted(terms)]
            self._pmi[key] = pmi_ratio_from_counts(
                joint, anchor_n, marginals, self.provider.stats.total_units, self.provider.exact
            )
        return self._pmi[key]

    def risky_for(self, entry: PolicyEntry, terms: frozenset[str]) -> bool:
        if not terms:
            return False
        r = self.pmi_ratio(entry, terms)
        if r is None:
            return False
        thr = self._thresholds[entry]
        # plain entries flag full disclosure, which is PMI == IC(c)
        return r > thr if entry.generalized else r >= thr

    def evidence(self, entry: PolicyEntry, terms: frozenset[str]) -> Evidence:
        return Evidence(entry.entity, to_bits(self.pmi_ratio(entry, terms)), to_bits(self._thresholds[entry]))

    def assess(self, terms: frozenset[str]) -> Evidence | None:
        """Evidence for the first policy entry the set is risky for, else ``None``."""
        for entry in self.policy.entries:
            if self.risky_for(entry, terms):
                return self.evidence(entry, terms)
        return None

    def safe(self, terms: frozenset[str]) -> bool:
        return not any(self.risky_for(e, terms) for e in self.policy.entries)

    def options(self, surface: str) -> list[tuple[str, Fraction]]:
        """The surface and its generalizations with chain-monotone informativeness.

        Each generalization is ranked by the minimum IC seen from ``surface``
        up to it, so a never-observed ancestor (whose clamped IC is maximal)
        cannot outrank the more specific concepts below it.
        """
        best = self.ic_ratio(surface)
        out = [(surface, best)]
        if self.tax is not None and surface in self.tax:
            for g in self.tax.chain(surface):
                best = min(best, self.ic_ratio(g))
                out.append((g, best))
        return out


def threshold(entry: PolicyEntry, provider: CountProvider) -> float:
    return to_bits(ic_ratio(entry.generalization if entry.generalized else entry.entity, provider))


def is_risky(
    terms: Iterable[str], entry: PolicyEntry, policy: ProtectionPolicy, provider: CountProvider
) -> tuple[bool, Evidence]:
    model = RiskModel(policy, provider)
    key = frozenset(normalize_phrase(t) for t in terms)
    return model.risky_for(entry, key), model.evidence(entry, key)


def _ranked_tuples(options: Sequence[Sequence[tuple[str, Fraction]]]):
    """Yield index tuples of the option lattice by decreasing product of ranks.

    Option lists are non-increasing in rank, so a best-first walk from the
    all-zero tuple visits tuples in sorted order; ties fall back to
    enumeration (lexicographic index) order.
    """
    def key(idx):
        prod = Fraction(1)
        for opts, i in zip(options, idx):
            prod *= opts[i][1]
        return (-prod, idx)

    start = (0,) * len(options)
    heap = [key(start)]
    seen = {start}
    while heap:
        _, idx = heapq.heappop(heap)
        yield idx
        for pos in range(len(idx)):
            if idx[pos] + 1 < len(options[pos]):
                nxt = idx[:pos] + (idx[pos] + 1,) + idx[pos + 1 :]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, key(nxt))


def select_generalizations(members: Sequence[str], model: RiskModel) -> dict[str, object]:
    """Replacement for each changed member: a concept or :data:`SUPPRESSED`.

    Candidate tuples draw each member from itself plus its generalization
    chain; the untouched tuple is skipped. The first tuple, in order of
    decreasing aggregated informativeness, that is safe for every policy
    entry wins. If none is, the most informative member is suppressed and
    the remainder is re-examined.
    """
    members = list(dict.fromkeys(members))
    options = [model.options(m) for m in members]
    for idx in _ranked_tuples(options):
        if not any(idx):
            continue
        chosen = [opts[i][0] for opts, i in zip(options, idx)]
        if model.safe(frozenset(chosen)):
            return {m: g for m, g in zip(members, chosen) if g != m}
    victim = max(members, key=lambda m: (model.ic_ratio(m), -members.index(m)))
    assignment: dict[str, object] = {victim: SUPPRESSED}
    rest = [m for m in members if m != victim]
    if rest and not model.safe(frozenset(rest)):
        assignment.update(select_generalizations(rest, model))
    return assignment


@dataclass
class ContextOutcome:
    """Final surface of every distinct term key in one context."""

    context_id: int
    final: dict[str, object]
    concepts: dict[str, str | None]

    def surviving(self) -> list[str]:
        return list(dict.fromkeys(v for v in self.final.values() if v is not SUPPRESSED))

    def changed(self) -> list[str]:
        return [k for k, v in self.final.items() if v != k]


@dataclass
class SanitizationResult:
    text: str
    report: SanitizationReport
    outcomes: list[ContextOutcome]

    def sanitized_terms(self) -> list[str]:
        """Original term keys that were generalized or suppressed anywhere."""
        return sorted({k for o in self.outcomes for k in o.changed()})


def _sanitize_context(ctx_id, keys, model, max_n, report, marker) -> dict[str, object]:
    provider = model.provider
    if not provider.exact:
        provider.prefetch(PhraseQuery.of(k) for k in keys)
    # H2: most informative first; sorted() is stable so ties keep document order
    order = sorted(keys, key=lambda k: -model.ic_ratio(k))
    current: dict[str, object] = {k: k for k in keys}
    cleared: set[frozenset[str]] = set()
    limit = min(max_n, len(order))
    changed = True
    while changed:
        changed = False
        for n in range(1, limit + 1):
            if not provider.exact:
                _prefetch_batch(order, n, current, model)
            for combo in combinations(order, n):
                members = list(dict.fromkeys(current[k] for k in combo if current[k] is not SUPPRESSED))
                mapped = frozenset(members)
                if not mapped or mapped in cleared:
                    continue
                ev = model.assess(mapped)
                if ev is None:
                    cleared.add(mapped)
                    continue
                assignment = select_generalizations(members, model)
                out = [assignment.get(m, m) for m in members]
                report.replacements.append(
                    Replacement(
                        ctx_id,
                        members,
                        [marker if v is SUPPRESSED else str(v) for v in out],
                        len(members),
                        ev.entity,
                        ev.pmi,
                        ev.threshold,
                    )
                )
                if SUPPRESSED in assignment.values():
                    report.residual_risk_flags.append(
                        {"context_id": ctx_id, "terms": members, "entity": ev.entity}
                    )
                for k, v in current.items():
                    if v in assignment:
                        current[k] = assignment[v]
                changed = True
    return current


def _prefetch_batch(order, n, current, model) -> None:
    queries = []
    ctx_of = {e: (e.generalization if model.policy.contextualize else None) for e in model.policy.entries}
    for combo in combinations(order, n):
        terms = {current[k] for k in combo if current[k] is not SUPPRESSED}
        if not terms:
            continue
        for e in model.policy.entries:
            anchor = [e.entity] + ([ctx_of[e]] if ctx_of[e] else [])
            queries.append(PhraseQuery.of(*anchor, *terms))
    model.provider.prefetch(queries)


def sanitize_document(
    text: str,
    policy: ProtectionPolicy,
    config: SanitizerConfig,
    tax: Taxonomy,
    provider: CountProvider,
) -> SanitizationResult:
    """Sanitize ``text``; raises :class:`SanitizationAborted` if the provider fails."""
    policy.check_taxonomy(tax)
    doc = Document.parse(text, tax, config.context_mode, config.stopwords, config.min_oov_length)
    report = SanitizationReport()
    outcomes = []
    try:
        model = RiskModel(policy, provider, tax)
        for ctx in doc.contexts:
            concepts: dict[str, str | None] = {}
            for t in ctx.terms:
                concepts.setdefault(t.key, t.concept)
            final = _sanitize_context(
                ctx.id, list(concepts), model, config.max_cardinality, report, config.marker
            )
            outcomes.append(ContextOutcome(ctx.id, final, concepts))
    except ProviderError as exc:
        raise SanitizationAborted(str(exc), report) from exc

    table = {}
    for ctx, outcome in zip(doc.contexts, outcomes):
        for t in ctx.terms:
            new = outcome.final[t.key]
            if new == t.key:
                continue
            t.current_replacement = new
            table[t.span] = config.marker if new is SUPPRESSED else str(new)
    return SanitizationResult(apply_replacements(text, table), report, outcomes)
