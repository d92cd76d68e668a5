"""Built-in toy datasets: a small protein hierarchy, a synthetic materials
taxonomy with compositional names, and a sentence generator that mentions
every concept often enough to pretrain against."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .taxonomy import Concept, Taxonomy

PROTEIN_CONCEPTS = [
    ("n1", "proteins"),
    ("n2", "membrane proteins"),
    ("n3", "bacterial outer membrane proteins"),
    ("n4", "porins"),
    ("n5", "membrane transport proteins"),
]

PROTEIN_EDGES = [
    ("n1", "n2"),
    ("n2", "n3"),
    ("n3", "n4"),
    ("n2", "n5"),
]


def protein_taxonomy() -> Taxonomy:
    concepts = [Concept(cid, tuple(name.split())) for cid, name in PROTEIN_CONCEPTS]
    return Taxonomy(concepts, PROTEIN_EDGES)


# family noun -> level-2 adjectives; level-3 prefixes are shared
_FAMILIES = [
    ("alloys", ["ferrous", "nonferrous", "amorphous", "sintered"]),
    ("polymers", ["thermoset", "thermoplastic", "conductive", "biodegradable"]),
    ("ceramics", ["oxide", "nitride", "carbide", "layered"]),
    ("composites", ["laminated", "particulate", "hybrid", "woven"]),
    ("coatings", ["ceramic", "polymeric", "metallic", "anodized"]),
    ("fibers", ["glass", "carbon", "aramid", "natural"]),
]

_PREFIXES = ["annealed", "reinforced", "porous", "dense"]


def synthetic_taxonomy(n_concepts: int = 60) -> Taxonomy:
    """Deterministic materials hierarchy with compositional names.

    Level 1 holds the six family nouns, level 2 pairs each family with an
    adjective, level 3 stacks a shared prefix on top of a level-2 name.  A
    couple of cross-links keep it a DAG rather than a tree.
    """
    if n_concepts < 8:
        raise ValueError("need at least the root plus the six families")
    names: list[str] = ["materials"]
    child_of: dict[int, int] = {}
    for noun, _ in _FAMILIES:
        child_of[len(names)] = 0
        names.append(noun)
    level2_start = len(names)
    for fam_i, (noun, adjectives) in enumerate(_FAMILIES):
        for adj in adjectives:
            child_of[len(names)] = 1 + fam_i
            names.append(f"{adj} {noun}")
    level2_count = len(names) - level2_start
    cursor = 0
    while len(names) < n_concepts:
        parent = level2_start + cursor % level2_count
        prefix = _PREFIXES[cursor // level2_count % len(_PREFIXES)]
        child_of[len(names)] = parent
        names.append(f"{prefix} {names[parent]}")
        cursor += 1
    names = names[:n_concepts]
    width = len(str(n_concepts - 1))
    ids = [f"m{i:0{width}d}" for i in range(len(names))]
    concepts = [Concept(ids[i], tuple(name.split())) for i, name in enumerate(names)]
    edges = [(ids[p], ids[c]) for c, p in child_of.items() if c < n_concepts]
    # cross-links: hybrid composites double as polymers, ceramic coatings as ceramics
    by_name = {name: ids[i] for i, name in enumerate(names)}
    for child, extra_parent in (("hybrid composites", "polymers"),
                                ("ceramic coatings", "ceramics")):
        if child in by_name and extra_parent in by_name:
            edges.append((by_name[extra_parent], by_name[child]))
    return Taxonomy(concepts, edges)


_SENTENCE_FORMS = [
    "the study of {} has advanced rapidly",
    "{} are used across many industries",
    "researchers often compare {} with older materials",
    "manufacturing {} requires careful process control",
    "the market for {} keeps growing",
    "{} resist wear under repeated loading",
    "engineers select {} for demanding applications",
    "recent reviews survey progress on {}",
    "the microstructure of {} determines strength",
    "testing {} under heat reveals failure modes",
]


def synthetic_corpus(t: Taxonomy, mentions_per_concept: int = 20,
                     seed: int = 0) -> list[str]:
    """Sentences mentioning every concept at least ``mentions_per_concept``
    times, with the surrounding words cycled deterministically."""
    rng = np.random.default_rng(seed)
    sentences = []
    for cid in sorted(t.concept_ids):
        text = t.concept(cid).text
        for k in range(mentions_per_concept):
            form = _SENTENCE_FORMS[int(rng.integers(len(_SENTENCE_FORMS)))]
            sentences.append(form.format(text))
    order = rng.permutation(len(sentences))
    return [sentences[i] for i in order]


def write_corpus(path: str | Path, sentences: list[str]) -> None:
    Path(path).write_text("\n".join(sentences) + "\n", encoding="utf-8")
