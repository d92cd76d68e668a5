"""Relational context around a candidate position.

Three views feed the encoders: templated relation sentences (one per
neighboring concept), a pair of directed subgraphs around the position
(root-ward and leaf-ward), and corrupted copies of the position used as
negative examples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NoContext
from .taxonomy import MASK, CandidatePosition, Concept, Taxonomy, remove_concepts

log = logging.getLogger(__name__)

# The anchor node stands in for the concept that would occupy the position.
ANCHOR = MASK

TEMPLATES: dict[str, tuple[str, ...]] = {
    "parent": ("is", "a", "class", "of"),
    "child": ("is", "a", "subclass", "of"),
    "sibling": ("is", "a", "sibling", "of"),
}


@dataclass(frozen=True)
class RelationSet:
    """Which relations become sentences, and how far up/down to reach."""

    include_parents: bool = True
    include_children: bool = True
    include_siblings: bool = True
    parent_hops: int = 1
    child_hops: int = 1


@dataclass(frozen=True)
class RelationSentence:
    """``<concept tokens> <template> [MASK]`` — one neighbor, one sentence."""

    tokens: tuple[str, ...]
    relation_kind: str  # parent | child | sibling
    source_concept: str

    def __post_init__(self):
        if self.tokens[-1] != MASK:
            raise ValueError("relation sentence must end with the mask token")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Subgraph:
    """An induced neighborhood of the anchor, edges directed parent->child."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    anchor: str = ANCHOR

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))


@dataclass(frozen=True)
class SubgraphPair:
    down: Subgraph  # anchor plus its ancestors; information flows root-ward in
    up: Subgraph  # anchor plus its descendants; information flows leaf-ward in


@dataclass(frozen=True)
class TrainingExample:
    position: CandidatePosition
    sentences: tuple[RelationSentence, ...]
    subgraphs: SubgraphPair
    target_name: tuple[str, ...] | None
    validity_label: int  # 1 = valid position, 0 = corrupted

    def __post_init__(self):
        if (self.validity_label == 1) != (self.target_name is not None):
            raise ValueError("target_name must be present exactly for valid examples")


# -- sentences -----------------------------------------------------------------


def _within_hops(t: Taxonomy, seeds: Iterable[str], hops: int, up: bool) -> set[str]:
    """Seeds plus everything within ``hops - 1`` further steps from them."""
    out = set(seeds)
    frontier = set(seeds)
    for _ in range(hops - 1):
        nxt = set()
        for node in frontier:
            nxt |= t.ancestors(node, 1) if up else t.descendants(node, 1)
        frontier = nxt - out
        out |= frontier
    return out


def position_siblings(t: Taxonomy, pos: CandidatePosition) -> set[str]:
    """Co-children of the position's parents, minus the position's own
    endpoints (a concept already serving as parent or child keeps that role).
    """
    out: set[str] = set()
    for p in pos.parents:
        out |= t.children(p)
    return out - pos.parents - pos.children


def build_sentences(
    t: Taxonomy, pos: CandidatePosition, relation_set: RelationSet = RelationSet()
) -> list[RelationSentence]:
    """Render one sentence per related concept, in a fixed order: root-ward
    relations, then leaf-ward, then siblings, each block sorted by id."""
    for node in pos.parents | pos.children:
        t.concept(node)

    def render(ids: Iterable[str], kind: str) -> list[RelationSentence]:
        return [
            RelationSentence(
                tokens=t.concept(u).name + TEMPLATES[kind] + (MASK,),
                relation_kind=kind,
                source_concept=u,
            )
            for u in sorted(ids)
        ]

    sentences: list[RelationSentence] = []
    if relation_set.include_parents:
        ups = _within_hops(t, pos.parents, relation_set.parent_hops, up=True)
        sentences += render(ups, "parent")
    if relation_set.include_children:
        downs = _within_hops(t, pos.children, relation_set.child_hops, up=False)
        sentences += render(downs, "child")
    if relation_set.include_siblings:
        sentences += render(position_siblings(t, pos), "sibling")
    if not sentences:
        raise NoContext("position has no renderable relations")
    return sentences


# -- subgraphs -----------------------------------------------------------------


def build_subgraphs(t: Taxonomy, pos: CandidatePosition, k_hops: int = 2) -> SubgraphPair:
    """Anchor plus ancestors within ``k_hops`` (down side) and descendants
    within ``k_hops`` (up side); edges are those induced in the host, plus the
    parent->anchor / anchor->child links."""
    if k_hops < 1:
        raise ValueError("k_hops must be >= 1")
    for node in pos.parents | pos.children:
        t.concept(node)

    above = _within_hops(t, pos.parents, k_hops, up=True)
    below = _within_hops(t, pos.children, k_hops, up=False)

    def induced(members: set[str]) -> set[tuple[str, str]]:
        return {(p, c) for (p, c) in t.edges if p in members and c in members}

    down = Subgraph(
        nodes=above | {ANCHOR},
        edges=induced(above) | {(p, ANCHOR) for p in pos.parents},
    )
    up = Subgraph(
        nodes=below | {ANCHOR},
        edges=induced(below) | {(ANCHOR, c) for c in pos.children},
    )
    return SubgraphPair(down=down, up=up)


# -- negatives -----------------------------------------------------------------


def sample_negatives(
    t: Taxonomy,
    pos: CandidatePosition,
    r_neg: float,
    rng: np.random.Generator,
) -> list[CandidatePosition]:
    """Corrupt the position by swapping one endpoint for an unrelated concept.

    Draws ``floor(r_neg)`` negatives plus one more with probability
    ``frac(r_neg)``, so fractional rates mean an expected count per positive.
    """
    if r_neg < 0:
        raise ValueError("r_neg must be >= 0")
    n = int(r_neg)
    frac = r_neg - n
    if frac > 0 and rng.random() < frac:
        n += 1
    if n == 0:
        return []

    pool = sorted(set(t.concept_ids) - pos.parents - pos.children)
    if not pool:
        log.warning("no substitute concepts available; emitting zero negatives")
        return []
    slots = [("parent", p) for p in sorted(pos.parents)] + [
        ("child", c) for c in sorted(pos.children)
    ]
    negatives = []
    for _ in range(n):
        side, member = slots[rng.integers(len(slots))]
        substitute = pool[rng.integers(len(pool))]
        parents, children = set(pos.parents), set(pos.children)
        if side == "parent":
            parents = (parents - {member}) | {substitute}
        else:
            children = (children - {member}) | {substitute}
        negatives.append(
            CandidatePosition(parents=parents, children=children, label="invalid")
        )
    return negatives


# -- enumeration & masking -------------------------------------------------------


def enumerate_candidate_positions(t: Taxonomy, k_hops: int = 1) -> list[CandidatePosition]:
    """Every single-parent/single-child pair within ``k_hops``, plus a leaf
    position under every concept; deduplicated, sorted for reproducibility."""
    if k_hops < 1:
        raise ValueError("k_hops must be >= 1")
    positions = {CandidatePosition(parents={p}, children=set()) for p in t.concept_ids}
    for p in t.concept_ids:
        for c in t.descendants(p, k_hops):
            positions.add(CandidatePosition(parents={p}, children={c}))
    return sorted(positions, key=CandidatePosition.key)


def mask_concept(t: Taxonomy, v: str) -> tuple[CandidatePosition, Taxonomy]:
    """Hide concept ``v``: its neighborhood becomes a valid position, and the
    remaining taxonomy is the host for context building."""
    pos = CandidatePosition(
        parents=t.parents(v), children=t.children(v), label="valid"
    )
    return pos, remove_concepts(t, [v])


def build_training_example(
    host: Taxonomy,
    pos: CandidatePosition,
    target_name: tuple[str, ...] | None,
    relation_set: RelationSet = RelationSet(),
    k_hops: int = 2,
) -> TrainingExample:
    """Bundle a position's contexts; raises NoContext for isolated positions."""
    return TrainingExample(
        position=pos,
        sentences=tuple(build_sentences(host, pos, relation_set)),
        subgraphs=build_subgraphs(host, pos, k_hops),
        target_name=target_name,
        validity_label=1 if target_name is not None else 0,
    )
