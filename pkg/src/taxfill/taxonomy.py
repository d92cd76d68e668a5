"""Taxonomy data model: concepts, edges, traversal queries, and TSV I/O.

A taxonomy is a directed acyclic graph of named concepts.  Edges point from
the more general concept (parent) to the more specific one (child).  Values
are immutable after construction, so they are safe to share across threads;
mutating operations return new ``Taxonomy`` values.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CyclicTaxonomy,
    DuplicateConcept,
    InvalidPosition,
    TaxonomyTooSmall,
    UnknownConcept,
)

# Reserved vocabulary entries, pinned to indices 0..3.
MASK, EOS, UNK, PAD = "[MASK]", "[EOS]", "[UNK]", "[PAD]"
RESERVED_TOKENS = (MASK, EOS, UNK, PAD)

DEFAULT_MAX_NAME_LEN = 12


def normalize_name(tokens: Iterable[str]) -> tuple[str, ...]:
    """Lowercase and drop empty fragments; names are whitespace-tokenized."""
    return tuple(t.lower() for t in tokens if t)


@dataclass(frozen=True)
class Concept:
    """A node: a stable id plus an ordered, lowercase token sequence."""

    id: str
    name: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "name", normalize_name(self.name))
        if not self.name:
            raise ValueError(f"concept {self.id!r} has an empty name")

    @property
    def text(self) -> str:
        return " ".join(self.name)


@dataclass(frozen=True)
class CandidatePosition:
    """A (parent-set, child-set) placeholder for a masked or new concept.

    ``parents`` may be empty only for positions derived from masking a root
    concept; positions used for insertion must have at least one parent
    (checked by :func:`validate_position`).
    """

    parents: frozenset[str]
    children: frozenset[str] = frozenset()
    label: str = "unknown"  # valid | invalid | unknown

    def __post_init__(self):
        object.__setattr__(self, "parents", frozenset(self.parents))
        object.__setattr__(self, "children", frozenset(self.children))

    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Deterministic sort/dedup key, ignoring the label."""
        return (tuple(sorted(self.parents)), tuple(sorted(self.children)))


class Taxonomy:
    """Immutable DAG of concepts with parent -> child edges."""

    def __init__(self, concepts: Iterable[Concept], edges: Iterable[tuple[str, str]]):
        self._concepts: dict[str, Concept] = {}
        for c in concepts:
            if c.id in self._concepts:
                raise DuplicateConcept(f"duplicate concept id {c.id!r}")
            self._concepts[c.id] = c
        self._edges: frozenset[tuple[str, str]] = frozenset(edges)
        self._parents: dict[str, set[str]] = {cid: set() for cid in self._concepts}
        self._children: dict[str, set[str]] = {cid: set() for cid in self._concepts}
        for parent, child in self._edges:
            if parent not in self._concepts:
                raise UnknownConcept(f"edge references unknown parent {parent!r}")
            if child not in self._concepts:
                raise UnknownConcept(f"edge references unknown child {child!r}")
            self._parents[child].add(parent)
            self._children[parent].add(child)
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        # Kahn's algorithm; leftover nodes imply a cycle.
        indegree = {cid: len(ps) for cid, ps in self._parents.items()}
        queue = deque(cid for cid, d in indegree.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)
        if seen != len(self._concepts):
            raise CyclicTaxonomy("taxonomy edges contain a cycle")

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._concepts)

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self._concepts

    @property
    def concept_ids(self) -> list[str]:
        return sorted(self._concepts)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    def concept(self, concept_id: str) -> Concept:
        try:
            return self._concepts[concept_id]
        except KeyError:
            raise UnknownConcept(f"unknown concept id {concept_id!r}") from None

    def concepts(self) -> list[Concept]:
        return [self._concepts[cid] for cid in self.concept_ids]

    def parents(self, concept_id: str) -> frozenset[str]:
        self.concept(concept_id)
        return frozenset(self._parents[concept_id])

    def children(self, concept_id: str) -> frozenset[str]:
        self.concept(concept_id)
        return frozenset(self._children[concept_id])

    def roots(self) -> frozenset[str]:
        """Nodes with in-degree 0; forests with several roots are allowed."""
        return frozenset(cid for cid in self._concepts if not self._parents[cid])

    def leaves(self) -> frozenset[str]:
        return frozenset(cid for cid in self._concepts if not self._children[cid])

    def names(self) -> frozenset[tuple[str, ...]]:
        return frozenset(c.name for c in self._concepts.values())

    def name_tokens(self) -> set[str]:
        tokens: set[str] = set()
        for c in self._concepts.values():
            tokens.update(c.name)
        return tokens

    # -- traversal ---------------------------------------------------------

    def _reach(self, start: str, step: dict[str, set[str]], max_hops: int | float) -> set[str]:
        self.concept(start)
        if max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        out: set[str] = set()
        frontier = {start}
        hops = 0
        while frontier and hops < max_hops:
            frontier = {nxt for node in frontier for nxt in step[node]} - out - {start}
            out |= frontier
            hops += 1
        return out

    def ancestors(self, concept_id: str, max_hops: int | float = math.inf) -> set[str]:
        """All nodes with a directed path to ``concept_id`` of length <= max_hops."""
        return self._reach(concept_id, self._parents, max_hops)

    def descendants(self, concept_id: str, max_hops: int | float = math.inf) -> set[str]:
        """All nodes reachable from ``concept_id`` within max_hops edges."""
        return self._reach(concept_id, self._children, max_hops)

    def siblings(self, concept_id: str) -> set[str]:
        """Nodes sharing at least one parent with ``concept_id`` (excluding it)."""
        self.concept(concept_id)
        out: set[str] = set()
        for parent in self._parents[concept_id]:
            out |= self._children[parent]
        out.discard(concept_id)
        return out

    def is_descendant(self, node: str, ancestor: str) -> bool:
        return node in self.descendants(ancestor)

    def depth(self) -> int:
        """Longest root-to-leaf path, counted in nodes."""
        order = self._topological_order()
        longest = {cid: 1 for cid in self._concepts}
        for node in order:
            for child in self._children[node]:
                longest[child] = max(longest[child], longest[node] + 1)
        return max(longest.values(), default=0)

    def _topological_order(self) -> list[str]:
        indegree = {cid: len(ps) for cid, ps in self._parents.items()}
        queue = deque(sorted(cid for cid, d in indegree.items() if d == 0))
        order: list[str] = []
        while queue:
            node = queue.popleft()
            order.append(node)
            for child in sorted(self._children[node]):
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)
        return order

    # -- mutation (returns new values) --------------------------------------

    def with_concepts(self, concepts: Iterable[Concept], edges: Iterable[tuple[str, str]]) -> "Taxonomy":
        return Taxonomy(list(self._concepts.values()) + list(concepts), set(self._edges) | set(edges))


def validate_position(t: Taxonomy, pos: CandidatePosition) -> None:
    """Check the insertion preconditions: nonempty parents, known endpoints,
    and every child a descendant of every parent."""
    if not pos.parents:
        raise InvalidPosition("position has no parents")
    for node in pos.parents | pos.children:
        t.concept(node)
    for parent in pos.parents:
        for child in pos.children:
            if not t.is_descendant(child, parent):
                raise InvalidPosition(
                    f"child {child!r} is not a descendant of parent {parent!r}"
                )


def insert_concept(t: Taxonomy, v: Concept, pos: CandidatePosition) -> Taxonomy:
    """Insert ``v`` at ``pos``: link it to all parents and children, and drop
    the direct parent->child shortcuts the new node now bridges."""
    if v.id in t:
        raise DuplicateConcept(f"concept id {v.id!r} already present")
    validate_position(t, pos)
    new_edges = {(p, v.id) for p in pos.parents} | {(v.id, c) for c in pos.children}
    redundant = {(p, c) for p in pos.parents for c in pos.children if (p, c) in t.edges}
    edges = (set(t.edges) - redundant) | new_edges
    return Taxonomy(list(t.concepts()) + [v], edges)


def remove_concepts(t: Taxonomy, ids: Iterable[str]) -> Taxonomy:
    """Drop the given concepts and every edge touching them."""
    gone = set(ids)
    for cid in gone:
        t.concept(cid)
    keep = [c for c in t.concepts() if c.id not in gone]
    edges = {(p, c) for (p, c) in t.edges if p not in gone and c not in gone}
    return Taxonomy(keep, edges)


def induced_subtaxonomy(t: Taxonomy, ids: Iterable[str]) -> Taxonomy:
    """Restrict to the given ids and the edges among them."""
    keep = set(ids)
    for cid in keep:
        t.concept(cid)
    concepts = [c for c in t.concepts() if c.id in keep]
    edges = {(p, c) for (p, c) in t.edges if p in keep and c in keep}
    return Taxonomy(concepts, edges)


def split_taxonomy(t: Taxonomy, seed: int) -> tuple[set[str], set[str], set[str]]:
    """Deterministic 3:1:1 split of concept ids; roots always land in train.

    Sizes are computed over the full concept set (n - 2*round(n/5) for train),
    then validation and test are drawn uniformly from the non-root concepts.
    """
    n = len(t)
    if n < 5:
        raise TaxonomyTooSmall(f"need at least 5 concepts, got {n}")
    n_val = int(round(n / 5))
    n_test = int(round(n / 5))
    non_root = sorted(set(t.concept_ids) - t.roots())
    if n_val + n_test > len(non_root):
        raise TaxonomyTooSmall("too many roots to carve a 3:1:1 split")
    rng = np.random.default_rng(seed)
    picked = rng.permutation(len(non_root))
    val = {non_root[i] for i in picked[:n_val]}
    test = {non_root[i] for i in picked[n_val : n_val + n_test]}
    train = set(t.concept_ids) - val - test
    return train, val, test


# -- TSV I/O -----------------------------------------------------------------


def _data_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def load_taxonomy(concepts_path: str | Path, edges_path: str | Path) -> Taxonomy:
    """Read ``id<TAB>name tokens`` and ``parent_id<TAB>child_id`` TSV files.

    Blank lines and ``#`` comments are ignored.  Names are lowercased and
    tokenized on whitespace; punctuation must be pre-split by ingestion.
    """
    concepts: list[Concept] = []
    for lineno, line in _data_lines(concepts_path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{concepts_path}:{lineno}: expected 'id<TAB>name'")
        cid, name = parts
        concepts.append(Concept(cid.strip(), tuple(name.split())))
    edges: set[tuple[str, str]] = set()
    for lineno, line in _data_lines(edges_path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{edges_path}:{lineno}: expected 'parent_id<TAB>child_id'")
        edges.add((parts[0].strip(), parts[1].strip()))
    return Taxonomy(concepts, edges)


def save_taxonomy(t: Taxonomy, concepts_path: str | Path, edges_path: str | Path) -> None:
    """Write the TSV pair accepted by :func:`load_taxonomy`."""
    with open(concepts_path, "w", encoding="utf-8") as fh:
        for c in t.concepts():
            fh.write(f"{c.id}\t{c.text}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for parent, child in sorted(t.edges):
            fh.write(f"{parent}\t{child}\n")


# -- token vocabulary ---------------------------------------------------------


class TokenVocabulary:
    """Bijective token <-> index mapping with reserved entries at 0..3."""

    def __init__(self, tokens: Sequence[str] = ()):
        self._tokens: list[str] = list(RESERVED_TOKENS)
        self._index: dict[str, int] = {tok: i for i, tok in enumerate(self._tokens)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token in RESERVED_TOKENS and self._index.get(token, 4) < 4:
            return self._index[token]
        if token in self._index:
            return self._index[token]
        self._index[token] = len(self._tokens)
        self._tokens.append(token)
        return self._index[token]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TokenVocabulary) and self._tokens == other._tokens

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    @property
    def mask_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    @property
    def unk_id(self) -> int:
        return 2

    @property
    def pad_id(self) -> int:
        return 3

    def index(self, token: str) -> int:
        """Index of ``token``, falling back to [UNK] for out-of-vocabulary."""
        return self._index.get(token, self.unk_id)

    def token(self, index: int) -> str:
        return self._tokens[index]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index(tok) for tok in tokens]

    def decode(self, ids: Iterable[int]) -> tuple[str, ...]:
        return tuple(self._tokens[i] for i in ids)

    def count_oov(self, tokens: Iterable[str]) -> int:
        return sum(1 for tok in tokens if tok not in self._index)


def build_vocabulary(
    t: Taxonomy,
    corpus_tokens: dict[str, int] | None = None,
    min_freq: int = 2,
) -> TokenVocabulary:
    """All taxonomy name tokens, plus corpus tokens at or above ``min_freq``."""
    vocab = TokenVocabulary()
    for tok in sorted(t.name_tokens()):
        vocab.add(tok)
    if corpus_tokens:
        for tok in sorted(corpus_tokens):
            if corpus_tokens[tok] >= min_freq:
                vocab.add(tok)
    return vocab
