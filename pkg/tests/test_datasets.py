import pytest

from taxfill.datasets import (
    PROTEIN_EDGES,
    protein_taxonomy,
    synthetic_corpus,
    synthetic_taxonomy,
    write_corpus,
)
from taxfill.pretrain import read_corpus


class TestProteinFixture:
    def test_shape(self):
        t = protein_taxonomy()
        assert len(t.concept_ids) == 5
        assert t.edges == frozenset(PROTEIN_EDGES)
        assert t.roots() == frozenset({"n1"})


class TestSyntheticTaxonomy:
    def test_size_and_single_root(self):
        t = synthetic_taxonomy(60)
        assert len(t.concept_ids) == 60
        assert t.roots() == frozenset({"m00"})
        assert t.concept("m00").text == "materials"

    def test_names_are_compositional(self):
        t = synthetic_taxonomy(60)
        texts = {t.concept(c).text for c in t.concept_ids}
        assert "alloys" in texts
        assert "ferrous alloys" in texts
        assert "annealed ferrous alloys" in texts
        assert len(texts) == 60  # no name reuse

    def test_children_extend_parent_names(self):
        t = synthetic_taxonomy(60)
        off_pattern = 0
        for cid in t.concept_ids:
            for parent in t.parents(cid):
                if parent == "m00":
                    continue
                parent_name = t.concept(parent).name
                child_name = t.concept(cid).name
                if child_name[-len(parent_name):] != parent_name:
                    off_pattern += 1
        assert off_pattern == 2  # exactly the two cross-links

    def test_has_a_multi_parent_concept(self):
        t = synthetic_taxonomy(60)
        widths = {len(t.parents(c)) for c in t.concept_ids}
        assert 2 in widths

    def test_deterministic(self):
        a = synthetic_taxonomy(45)
        b = synthetic_taxonomy(45)
        assert a.concept_ids == b.concept_ids
        assert a.edges == b.edges

    def test_small_sizes(self):
        t = synthetic_taxonomy(10)
        assert len(t.concept_ids) == 10
        with pytest.raises(ValueError):
            synthetic_taxonomy(5)

    def test_depth_reaches_four_levels(self):
        t = synthetic_taxonomy(60)
        assert t.depth() == 4


class TestSyntheticCorpus:
    def test_every_concept_mentioned_enough(self):
        t = synthetic_taxonomy(20)
        sentences = synthetic_corpus(t, mentions_per_concept=5, seed=1)
        assert len(sentences) == 20 * 5
        token_lists = [s.split() for s in sentences]
        for cid in t.concept_ids:
            name = list(t.concept(cid).name)
            n = len(name)
            hits = sum(
                1
                for tokens in token_lists
                for i in range(len(tokens) - n + 1)
                if tokens[i : i + n] == name
            )
            assert hits >= 5

    def test_lowercase_and_seeded(self):
        t = synthetic_taxonomy(12)
        a = synthetic_corpus(t, 3, seed=9)
        b = synthetic_corpus(t, 3, seed=9)
        c = synthetic_corpus(t, 3, seed=10)
        assert a == b
        assert a != c
        assert all(s == s.lower() for s in a)

    def test_write_and_read_back(self, tmp_path):
        t = synthetic_taxonomy(12)
        sentences = synthetic_corpus(t, 2, seed=0)
        path = tmp_path / "corpus.txt"
        write_corpus(path, sentences)
        assert read_corpus(path) == [s.split() for s in sentences]
