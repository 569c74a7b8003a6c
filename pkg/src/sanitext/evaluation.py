"""Scoring against gold annotations and exhaustive oracles for small instances."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from pathlib import Path

from sanitext.measures import to_bits
from sanitext.normalize import normalize_phrase
from sanitext.sanitizer import SUPPRESSED, RiskModel

MAX_SAFETY_TERMS = 20
MAX_OPTIMAL_TERMS = 8
MAX_ASSIGNMENTS = 2_000_000


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f_measure: float
    #: set when the system flagged nothing, so precision was reported as 0
    empty_system: bool = False

    def format(self) -> str:
        return f"{self.precision:.1f} {self.recall:.1f} {self.f_measure:.1f}"


def f_measure(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def score(system: Iterable[str], gold: Iterable[str]) -> ScoreTriple:
    """Precision, recall and F-measure (percentages) of system terms against gold terms."""
    s = {normalize_phrase(t) for t in system}
    h = {normalize_phrase(t) for t in gold}
    if not h:
        raise ValueError("gold annotation set is empty; recall is undefined")
    hits = len(s & h)
    recall = 100.0 * hits / len(h)
    if not s:
        return ScoreTriple(0.0, recall, 0.0, empty_system=True)
    precision = 100.0 * hits / len(s)
    return ScoreTriple(precision, recall, f_measure(precision, recall))


def macro_average(triples: Sequence[ScoreTriple]) -> ScoreTriple:
    """Component-wise mean of several score rows."""
    if not triples:
        raise ValueError("nothing to average")
    n = len(triples)
    return ScoreTriple(
        sum(t.precision for t in triples) / n,
        sum(t.recall for t in triples) / n,
        sum(t.f_measure for t in triples) / n,
    )


def parse_annotations(text: str) -> set[str]:
    return {
        normalize_phrase(line)
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    }


def load_annotations(path: str | Path) -> set[str]:
    return parse_annotations(Path(path).read_text(encoding="utf-8"))


def oracle_safety_check(
    surviving: Iterable[str], model: RiskModel, max_n: int | None = None
) -> tuple[bool, list[frozenset[str]]]:
    """Check every subset of the surviving terms up to ``max_n`` members."""
    terms = list(dict.fromkeys(surviving))
    if len(terms) > MAX_SAFETY_TERMS:
        raise InstanceTooLarge(f"{len(terms)} terms exceed the exhaustive limit of {MAX_SAFETY_TERMS}")
    top = len(terms) if max_n is None else min(max_n, len(terms))
    violations = [
        frozenset(sub)
        for n in range(1, top + 1)
        for sub in combinations(terms, n)
        if not model.safe(frozenset(sub))
    ]
    return not violations, violations


def retained_ic(term: str, value: object, model: RiskModel) -> float:
    """Informativeness kept when ``term`` is rewritten to ``value``.

    Measured as the smallest IC on the generalization path from ``term`` to
    ``value``; suppression keeps nothing.
    """
    return to_bits(_retained_ratio(term, value, model))


def _retained_ratio(term: str, value: object, model: RiskModel) -> Fraction:
    if value is SUPPRESSED:
        return Fraction(1)
    for surface, rank in model.options(term):
        if surface == value:
            return rank
    raise ValueError(f"{value!r} is not a generalization of {term!r}")


def retained_total(assignment: dict[str, object], model: RiskModel) -> float:
    prod = Fraction(1)
    for term, value in assignment.items():
        prod *= _retained_ratio(term, value, model)
    return to_bits(prod)


@dataclass
class OptimalAssignment:
    assignment: dict[str, object]
    retained_ic: float
    examined: int


def oracle_optimal_utility(terms: Sequence[str], model: RiskModel) -> OptimalAssignment:
    """Best safe rewrite of ``terms`` by exhaustive search.

    Each term may stay, move to any element of its generalization chain, or
    be suppressed. Among assignments whose surviving surfaces pass the
    full-cardinality safety check, the one with the largest retained IC wins;
    ties keep the earliest assignment in enumeration order.
    """
    terms = list(dict.fromkeys(terms))
    if len(terms) > MAX_OPTIMAL_TERMS:
        raise InstanceTooLarge(f"{len(terms)} terms exceed the exhaustive limit of {MAX_OPTIMAL_TERMS}")
    options = [model.options(t) + [(SUPPRESSED, Fraction(1))] for t in terms]
    size = 1
    for o in options:
        size *= len(o)
    if size > MAX_ASSIGNMENTS:
        raise InstanceTooLarge(f"{size} assignments exceed the exhaustive limit of {MAX_ASSIGNMENTS}")

    safe_memo: dict[frozenset[str], bool] = {frozenset(): True}

    def all_subsets_safe(s: frozenset[str]) -> bool:
        hit = safe_memo.get(s)
        if hit is None:
            hit = model.safe(s) and all(all_subsets_safe(s - {x}) for x in s)
            safe_memo[s] = hit
        return hit

    best: tuple[Fraction, tuple] | None = None
    for choice in product(*options):
        surviving = frozenset(v for v, _ in choice if v is not SUPPRESSED)
        value = Fraction(1)
        for _, r in choice:
            value *= r
        if best is not None and value <= best[0]:
            continue
        if all_subsets_safe(surviving):
            best = (value, choice)
    assert best is not None  # all-suppression is always safe
    assignment = {t: v for t, (v, _) in zip(terms, best[1])}
    return OptimalAssignment(assignment, to_bits(best[0]), size)
