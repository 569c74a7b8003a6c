"""Information content and pointwise mutual information from corpus counts.

Every quantity is first formed as an exact ratio of integer counts, so that
risk comparisons never depend on floating-point rounding. Values in bits
are ``log2`` of those ratios.

Group PMI divides the joint probability by the product of the *marginal*
probabilities of each group member, so it grows with group size faster
than a joint-denominator form would.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from sanitext.corpus import CountProvider, PhraseQuery
from sanitext.normalize import normalize_phrase
from sanitext.taxonomy import Taxonomy, UnknownTermError

NEG_INF = float("-inf")


def to_bits(ratio: Fraction | None) -> float:
    """log2 of an exact ratio; ``None`` (no co-occurrence) maps to -inf."""
    if ratio is None:
        return NEG_INF
    return math.log2(ratio.numerator) - math.log2(ratio.denominator)


def ic_ratio(term: str, provider: CountProvider) -> Fraction:
    """``W / max(count(term), 1)``; its log2 is the information content."""
    n = provider.count(PhraseQuery.of(term))
    return Fraction(provider.stats.total_units, max(n, 1))


def information_content(term: str, provider: CountProvider) -> float:
    return to_bits(ic_ratio(term, provider))


def pmi_ratio(
    c: str,
    terms: Iterable[str],
    provider: CountProvider,
    ctx: str | None = None,
) -> Fraction | None:
    """Ratio inside the PMI logarithm, or ``None`` when the joint count is zero.

    Without ``ctx``::

        count(c, t1..tn) / W
        ---------------------------------------
        count(c)/W * count(t1)/W * ... count(tn)/W

    With ``ctx`` every occurrence of ``c`` in the counts becomes the pair
    ``(c AND ctx)``. Marginals of zero are clamped to one. For exact
    (local) providers the joint is also clamped to each marginal.
    """
    anchor = PhraseQuery.of(c) if ctx is None else PhraseQuery.of(c, ctx)
    group = frozenset(normalize_phrase(t) for t in terms)
    if not group or "" in group:
        raise ValueError("PMI needs at least one non-empty term")
    return pmi_ratio_from_counts(
        provider.count(PhraseQuery.trusted(anchor.phrases | group)),
        provider.count(anchor),
        [provider.count(PhraseQuery.trusted(frozenset((t,)))) for t in sorted(group)],
        provider.stats.total_units,
        provider.exact,
    )


def pmi_ratio_from_counts(
    joint: int, anchor: int, marginals: list[int], total_units: int, exact: bool
) -> Fraction | None:
    anchor = max(anchor, 1)
    marginals = [max(m, 1) for m in marginals]
    if exact:
        joint = min(joint, anchor, *marginals)
    if joint == 0:
        return None
    den = anchor
    for m in marginals:
        den *= m
    return Fraction(joint * total_units ** len(marginals), den)


def pmi(
    c: str,
    terms: Iterable[str],
    provider: CountProvider,
    ctx: str | None = None,
) -> float:
    return to_bits(pmi_ratio(c, terms, provider, ctx))


@dataclass
class TaggedCorpusStats:
    """Concept occurrence counts of a sense-tagged corpus."""

    concept_occurrences: Mapping[str, int] = field(default_factory=dict)

    @property
    def total_occurrences(self) -> int:
        return sum(self.concept_occurrences.values())

    @classmethod
    def from_documents(cls, documents: Iterable[str], tax: Taxonomy) -> TaggedCorpusStats:
        """Tag every in-vocabulary term occurrence with its taxonomy concept."""
        from sanitext.textproc import extract_terms

        occ: Counter[str] = Counter()
        for doc in documents:
            for term in extract_terms(doc, tax, stopwords=frozenset(), min_oov_length=None):
                occ[term.concept] += 1
        return cls(dict(occ))


def resnik_ic(concept: str, tagged: TaggedCorpusStats, tax: Taxonomy) -> float:
    """IC of a concept counting the occurrences of all of its specializations."""
    concept = normalize_phrase(concept)
    if concept not in tax.lexicon or tax.resolve(concept) != concept:
        raise UnknownTermError(concept)
    total = tagged.total_occurrences
    if total <= 0:
        raise ValueError("tagged corpus has no concept occurrences")
    subsumed = sum(tagged.concept_occurrences.get(h, 0) for h in tax.descendants(concept))
    return math.log2(total) - math.log2(max(subsumed, 1))
