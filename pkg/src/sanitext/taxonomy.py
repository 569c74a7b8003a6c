"""Hypernym taxonomy with a synonym lexicon.

File format (UTF-8, one record per line)::

    child<TAB>parent                 hypernym edge
    syn<TAB>surface<TAB>concept      synonym mapping
    # comment

Concepts are identified by their normalized canonical surface form. Exactly
one concept may be left without parents; it becomes the root.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from functools import cached_property
from pathlib import Path

from sanitext.normalize import normalize_phrase, phrase_tokens


class TaxonomyError(ValueError):
    """Raised when a taxonomy file or edge list violates the format or invariants."""


class UnknownTermError(KeyError):
    """Raised when a term or concept is not present in the taxonomy."""


class Taxonomy:
    """Immutable hypernym DAG with a single root.

    ``parents`` maps each concept to its direct hypernyms in authoring order;
    the first parent is the one followed by :meth:`chain`.
    """

    def __init__(
        self,
        parents: Mapping[str, Iterable[str]],
        synonyms: Mapping[str, str] | None = None,
    ) -> None:
        concepts: dict[str, None] = {}
        edges: dict[str, tuple[str, ...]] = {}
        for child, ps in parents.items():
            child = normalize_phrase(child)
            ordered = tuple(dict.fromkeys(normalize_phrase(p) for p in ps))
            edges[child] = edges.get(child, ()) + tuple(p for p in ordered if p not in edges.get(child, ()))
            concepts.setdefault(child)
            for p in ordered:
                concepts.setdefault(p)
        for c in concepts:
            edges.setdefault(c, ())
        self._parents = edges
        self._concepts = tuple(concepts)

        lexicon = {c: c for c in self._concepts}
        syn_map: dict[str, str] = {}
        for surface, concept in (synonyms or {}).items():
            surface, concept = normalize_phrase(surface), normalize_phrase(concept)
            if concept not in edges:
                raise TaxonomyError(f"synonym {surface!r} refers to unknown concept {concept!r}")
            if lexicon.get(surface, concept) != concept:
                raise TaxonomyError(
                    f"surface form {surface!r} maps to both {lexicon[surface]!r} and {concept!r}"
                )
            lexicon[surface] = concept
            if surface != concept:
                syn_map[surface] = concept
        self._lexicon = lexicon
        self._synonyms = syn_map
        self.root = self._validate()

    def _validate(self) -> str:
        roots = [c for c in self._concepts if not self._parents[c]]
        # colour marking: 1 = on the DFS stack, 2 = finished
        state: dict[str, int] = {}
        for start in self._concepts:
            if start in state:
                continue
            stack = [(start, iter(self._parents[start]))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    raise TaxonomyError(f"cycle detected through concept {nxt!r}")
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(self._parents[nxt])))
        if len(roots) != 1:
            if not roots:
                raise TaxonomyError("taxonomy has no root")
            raise TaxonomyError(f"taxonomy has multiple roots: {', '.join(sorted(roots))}")
        return roots[0]

    @property
    def concepts(self) -> tuple[str, ...]:
        return self._concepts

    @property
    def synonyms(self) -> dict[str, str]:
        return dict(self._synonyms)

    @property
    def lexicon(self) -> Mapping[str, str]:
        """Every known surface form (canonical names and synonyms) to its concept."""
        return self._lexicon

    @cached_property
    def token_lexicon(self) -> tuple[dict[tuple[str, ...], str], int]:
        """Lexicon keyed by token tuples, plus the longest entry length in tokens."""
        table: dict[tuple[str, ...], str] = {}
        for surface, concept in self._lexicon.items():
            toks = phrase_tokens(surface)
            if toks:
                table.setdefault(toks, concept)
        return table, max((len(k) for k in table), default=0)

    def parents(self, concept: str) -> tuple[str, ...]:
        try:
            return self._parents[concept]
        except KeyError:
            raise UnknownTermError(concept) from None

    def __contains__(self, term: object) -> bool:
        return isinstance(term, str) and normalize_phrase(term) in self._lexicon

    def __len__(self) -> int:
        return len(self._concepts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return self._parents == other._parents and self._synonyms == other._synonyms

    def __repr__(self) -> str:
        return f"Taxonomy({len(self)} concepts, root={self.root!r})"

    def resolve(self, term: str) -> str:
        """Concept for a surface form or concept name."""
        try:
            return self._lexicon[normalize_phrase(term)]
        except KeyError:
            raise UnknownTermError(term) from None

    def chain(self, term: str) -> tuple[str, ...]:
        """Generalizations of ``term`` from its first parent up to the root."""
        node = self.resolve(term)
        steps = []
        while self._parents[node]:
            node = self._parents[node][0]
            steps.append(node)
        return tuple(steps)

    @cached_property
    def _ancestors(self) -> dict[str, frozenset[str]]:
        memo: dict[str, frozenset[str]] = {}

        def visit(c: str) -> frozenset[str]:
            if c not in memo:
                acc = {c}
                for p in self._parents[c]:
                    acc |= visit(p)
                memo[c] = frozenset(acc)
            return memo[c]

        for c in self._concepts:
            # iterative order keeps recursion shallow on deep chains
            for a in reversed(self._chain_nodes(c)):
                visit(a)
        return memo

    def _chain_nodes(self, c: str) -> list[str]:
        nodes = [c]
        while self._parents[nodes[-1]]:
            nodes.append(self._parents[nodes[-1]][0])
        return nodes

    @cached_property
    def _descendants(self) -> dict[str, frozenset[str]]:
        acc: dict[str, set[str]] = {c: set() for c in self._concepts}
        for c, ancestors in self._ancestors.items():
            for a in ancestors:
                acc[a].add(c)
        return {c: frozenset(d) for c, d in acc.items()}

    def ancestors(self, concept: str) -> frozenset[str]:
        """The concept itself and everything reachable through hypernym edges."""
        try:
            return self._ancestors[normalize_phrase(concept)]
        except KeyError:
            raise UnknownTermError(concept) from None

    def descendants(self, concept: str) -> frozenset[str]:
        """The concept itself and all of its specializations."""
        try:
            return self._descendants[normalize_phrase(concept)]
        except KeyError:
            raise UnknownTermError(concept) from None

    def is_hypernym(self, a: str, b: str) -> bool:
        """True iff ``a`` generalizes ``b`` (reflexive)."""
        a = normalize_phrase(a)
        if a not in self._parents:
            raise UnknownTermError(a)
        return a in self.ancestors(b)

    def to_text(self) -> str:
        lines = [f"{c}\t{p}" for c in self._concepts for p in self._parents[c]]
        lines += [f"syn\t{s}\t{c}" for s, c in self._synonyms.items()]
        return "\n".join(lines) + "\n"


def parse_taxonomy(text: str) -> Taxonomy:
    parents: dict[str, list[str]] = {}
    synonyms: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [normalize_phrase(f) for f in raw.split("\t")]
        if len(fields) == 3 and fields[0] == "syn" and fields[1] and fields[2]:
            surface, concept = fields[1], fields[2]
            if synonyms.get(surface, concept) != concept:
                raise TaxonomyError(f"line {lineno}: surface form {surface!r} is ambiguous")
            synonyms[surface] = concept
        elif len(fields) == 2 and all(fields):
            child, parent = fields
            parents.setdefault(child, [])
            if parent not in parents[child]:
                parents[child].append(parent)
        else:
            raise TaxonomyError(f"line {lineno}: malformed record {raw!r}")
    # parents never declared as children are still concepts (the root among them)
    for ps in list(parents.values()):
        for p in ps:
            parents.setdefault(p, [])
    return Taxonomy(parents, synonyms)


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Read and validate a taxonomy file."""
    return parse_taxonomy(Path(path).read_text(encoding="utf-8"))


def generalization_chain(term: str, tax: Taxonomy) -> tuple[str, ...]:
    return tax.chain(term)


def is_hypernym(a: str, b: str, tax: Taxonomy) -> bool:
    return tax.is_hypernym(a, b)
