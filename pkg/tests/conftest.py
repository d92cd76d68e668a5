"""Shared fixtures: the small protein taxonomy used throughout the tests."""

import pytest

from taxfill.taxonomy import Concept, Taxonomy

# Chain: proteins -> membrane proteins -> bacterial outer membrane proteins
# -> porins, with "membrane transport proteins" as a second child of
# "membrane proteins".
PROTEIN_CONCEPTS = [
    ("n1", "proteins"),
    ("n2", "membrane proteins"),
    ("n3", "bacterial outer membrane proteins"),
    ("n4", "porins"),
    ("n5", "membrane transport proteins"),
]
PROTEIN_EDGES = [("n1", "n2"), ("n2", "n3"), ("n3", "n4"), ("n2", "n5")]


def make_protein_taxonomy(with_sibling: bool = True) -> Taxonomy:
    concepts = PROTEIN_CONCEPTS if with_sibling else PROTEIN_CONCEPTS[:4]
    edges = PROTEIN_EDGES if with_sibling else PROTEIN_EDGES[:3]
    return Taxonomy(
        [Concept(cid, tuple(name.split())) for cid, name in concepts], edges
    )


@pytest.fixture
def chain4() -> Taxonomy:
    """The 4-node chain without the sibling branch."""
    return make_protein_taxonomy(with_sibling=False)


@pytest.fixture
def proteins() -> Taxonomy:
    """The 5-node fixture including the sibling branch."""
    return make_protein_taxonomy(with_sibling=True)
