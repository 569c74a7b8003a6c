from __future__ import annotations

import math
import sys
from fractions import Fraction
from pathlib import Path

import pytest

from sanitext.corpus import LocalCountProvider
from sanitext.sanitizer import load_policy
from sanitext.taxonomy import load_taxonomy

TESTS = Path(__file__).parent
F8 = TESTS / "fixtures" / "f8"
sys.path.insert(0, str(TESTS))


class BruteCounter:
    """Counts documents by scanning token sets; shares no code with the index."""

    def __init__(self, directory: Path) -> None:
        self.docs = [set(p.read_text().split()) for p in sorted(directory.iterdir())]
        self.W = len(self.docs)

    def count(self, *words: str) -> int:
        return sum(1 for d in self.docs if all(w in d for w in words))

    def ic(self, w: str) -> float:
        return -math.log2(max(self.count(w), 1) / self.W)

    def pmi(self, c: str, terms: list[str], ctx: str | None = None) -> float:
        anchor = [c] if ctx is None else [c, ctx]
        joint = self.count(*anchor, *terms)
        if joint == 0:
            return float("-inf")
        p_joint = Fraction(joint, self.W)
        den = Fraction(max(self.count(*anchor), 1), self.W)
        for t in terms:
            den *= Fraction(max(self.count(t), 1), self.W)
        return math.log2(p_joint / den)


@pytest.fixture(scope="session")
def brute() -> BruteCounter:
    return BruteCounter(F8 / "docs")


@pytest.fixture
def f8_provider() -> LocalCountProvider:
    return LocalCountProvider.from_directory(F8 / "docs")


@pytest.fixture(scope="session")
def t8():
    return load_taxonomy(F8 / "t8.tsv")


@pytest.fixture(scope="session")
def gen_policy():
    return load_policy(F8 / "policy_generalized.tsv", contextualize=True)


@pytest.fixture(scope="session")
def plain_policy():
    return load_policy(F8 / "policy_plain.tsv")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
