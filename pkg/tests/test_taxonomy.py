import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taxfill.errors import (
    CyclicTaxonomy,
    DuplicateConcept,
    InvalidPosition,
    TaxonomyTooSmall,
    UnknownConcept,
)
from taxfill.taxonomy import (
    CandidatePosition,
    Concept,
    Taxonomy,
    TokenVocabulary,
    build_vocabulary,
    induced_subtaxonomy,
    insert_concept,
    load_taxonomy,
    remove_concepts,
    save_taxonomy,
    split_taxonomy,
    validate_position,
)

from conftest import PROTEIN_CONCEPTS, PROTEIN_EDGES


def to_nx(t: Taxonomy) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(t.concept_ids)
    g.add_edges_from(t.edges)
    return g


# -- strategies ---------------------------------------------------------------

@st.composite
def dags(draw, min_nodes=2, max_nodes=12):
    """Random DAGs: edges only point from lower to higher node index."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    concepts = [Concept(f"c{i}", (f"tok{i}",)) for i in range(n)]
    edges = {(f"c{i}", f"c{j}") for i, j in chosen}
    return Taxonomy(concepts, edges)


# -- loading ------------------------------------------------------------------

class TestLoad:
    def write_pair(self, tmp_path, concept_rows, edge_rows):
        cpath = tmp_path / "concepts.tsv"
        epath = tmp_path / "edges.tsv"
        cpath.write_text("\n".join(concept_rows) + "\n", encoding="utf-8")
        epath.write_text("\n".join(edge_rows) + "\n", encoding="utf-8")
        return cpath, epath

    def test_chain_fixture(self, tmp_path):
        cpath, epath = self.write_pair(
            tmp_path,
            [f"{cid}\t{name}" for cid, name in PROTEIN_CONCEPTS[:4]],
            [f"{p}\t{c}" for p, c in PROTEIN_EDGES[:3]],
        )
        t = load_taxonomy(cpath, epath)
        assert len(t) == 4
        assert len(t.edges) == 3
        assert t.depth() == 4

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        cpath, epath = self.write_pair(
            tmp_path,
            ["# concepts", "", "a\talpha", "  # indented comment", "b\tbeta thing"],
            ["# edges", "", "a\tb"],
        )
        t = load_taxonomy(cpath, epath)
        assert t.concept_ids == ["a", "b"]
        assert t.concept("b").name == ("beta", "thing")

    def test_names_lowercased(self, tmp_path):
        cpath, epath = self.write_pair(tmp_path, ["a\tAlpha Thing"], [])
        t = load_taxonomy(cpath, epath)
        assert t.concept("a").name == ("alpha", "thing")

    def test_single_concept_no_edges(self, tmp_path):
        cpath, epath = self.write_pair(tmp_path, ["a\talpha"], [])
        t = load_taxonomy(cpath, epath)
        assert len(t) == 1
        assert len(t.edges) == 0

    def test_two_cycle_rejected(self, tmp_path):
        cpath, epath = self.write_pair(
            tmp_path, ["a\talpha", "b\tbeta"], ["a\tb", "b\ta"]
        )
        with pytest.raises(CyclicTaxonomy):
            load_taxonomy(cpath, epath)

    def test_dangling_edge_rejected(self, tmp_path):
        cpath, epath = self.write_pair(tmp_path, ["a\talpha"], ["a\tmissing"])
        with pytest.raises(UnknownConcept):
            load_taxonomy(cpath, epath)

    def test_duplicate_id_rejected(self, tmp_path):
        cpath, epath = self.write_pair(tmp_path, ["a\talpha", "a\tother"], [])
        with pytest.raises(DuplicateConcept):
            load_taxonomy(cpath, epath)

    def test_save_load_round_trip(self, tmp_path, proteins):
        save_taxonomy(proteins, tmp_path / "c.tsv", tmp_path / "e.tsv")
        back = load_taxonomy(tmp_path / "c.tsv", tmp_path / "e.tsv")
        assert back.concept_ids == proteins.concept_ids
        assert back.edges == proteins.edges
        assert [c.name for c in back.concepts()] == [c.name for c in proteins.concepts()]


# -- traversal ----------------------------------------------------------------

class TestTraversal:
    def test_ancestors_two_hops(self, proteins):
        assert proteins.ancestors("n3", max_hops=2) == {"n2", "n1"}

    def test_ancestors_of_root_empty(self, proteins):
        assert proteins.ancestors("n1", max_hops=5) == set()
        assert proteins.ancestors("n1") == set()

    def test_ancestors_one_hop(self, proteins):
        assert proteins.ancestors("n4", max_hops=1) == {"n3"}

    def test_descendants_two_hops(self, proteins):
        assert proteins.descendants("n2", max_hops=2) == {"n3", "n4", "n5"}

    def test_descendants_of_leaf_empty(self, proteins):
        assert proteins.descendants("n4", max_hops=3) == set()

    def test_descendants_one_hop(self, proteins):
        assert proteins.descendants("n1", max_hops=1) == {"n2"}

    def test_unknown_id_raises(self, proteins):
        with pytest.raises(UnknownConcept):
            proteins.ancestors("ghost")
        with pytest.raises(UnknownConcept):
            proteins.descendants("ghost")
        with pytest.raises(UnknownConcept):
            proteins.siblings("ghost")

    def test_siblings_via_shared_parent(self, proteins):
        assert proteins.siblings("n3") == {"n5"}

    def test_only_child_has_no_siblings(self, chain4):
        assert chain4.siblings("n3") == set()

    def test_siblings_two_shared_parents_counted_once(self):
        t = Taxonomy(
            [Concept(i, (i,)) for i in ("p1", "p2", "x", "y")],
            [("p1", "x"), ("p1", "y"), ("p2", "x"), ("p2", "y")],
        )
        assert t.siblings("x") == {"y"}
        assert t.siblings("y") == {"x"}

    def test_roots_and_leaves(self, proteins):
        assert proteins.roots() == {"n1"}
        assert proteins.leaves() == {"n4", "n5"}

    @given(dags())
    @settings(max_examples=60, deadline=None)
    def test_matches_bfs_oracle(self, t):
        g = to_nx(t)
        for v in t.concept_ids:
            for hops in (1, 2, math.inf):
                cutoff = None if hops is math.inf else hops
                down = set(
                    nx.single_source_shortest_path_length(g, v, cutoff=cutoff)
                ) - {v}
                up = set(
                    nx.single_source_shortest_path_length(
                        g.reverse(copy=False), v, cutoff=cutoff
                    )
                ) - {v}
                assert t.descendants(v, hops) == down
                assert t.ancestors(v, hops) == up

    @given(dags())
    @settings(max_examples=60, deadline=None)
    def test_ancestors_disjoint_from_descendants(self, t):
        for v in t.concept_ids:
            assert t.ancestors(v) & t.descendants(v) == set()

    @given(dags(min_nodes=3, max_nodes=10))
    @settings(max_examples=40, deadline=None)
    def test_depth_matches_longest_path_oracle(self, t):
        g = to_nx(t)
        assert t.depth() == nx.dag_longest_path_length(g) + 1


# -- insertion ----------------------------------------------------------------

class TestInsert:
    def test_bridged_shortcut_removed(self, proteins):
        pos = CandidatePosition(parents={"n1"}, children={"n2"})
        t2 = insert_concept(proteins, Concept("x", ("extra",)), pos)
        assert ("n1", "n2") not in t2.edges
        assert ("n1", "x") in t2.edges
        assert ("x", "n2") in t2.edges
        assert "n2" in t2.descendants("n1")

    def test_leaf_insertion_adds_one_edge(self, proteins):
        pos = CandidatePosition(parents={"n4"}, children=set())
        t2 = insert_concept(proteins, Concept("x", ("extra",)), pos)
        assert t2.edges == proteins.edges | {("n4", "x")}

    def test_non_descendant_child_rejected(self, proteins):
        pos = CandidatePosition(parents={"n4"}, children={"n5"})
        with pytest.raises(InvalidPosition):
            insert_concept(proteins, Concept("x", ("extra",)), pos)

    def test_empty_parents_rejected(self, proteins):
        pos = CandidatePosition(parents=set(), children={"n4"})
        with pytest.raises(InvalidPosition):
            validate_position(proteins, pos)

    def test_duplicate_id_rejected(self, proteins):
        pos = CandidatePosition(parents={"n4"})
        with pytest.raises(DuplicateConcept):
            insert_concept(proteins, Concept("n1", ("clash",)), pos)

    def test_unknown_endpoint_rejected(self, proteins):
        pos = CandidatePosition(parents={"ghost"})
        with pytest.raises(UnknownConcept):
            validate_position(proteins, pos)

    @given(dags(min_nodes=3, max_nodes=10), st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_insert_preserves_acyclicity_and_reachability(self, t, rnd):
        parent = rnd.choice(t.concept_ids)
        below = sorted(t.descendants(parent))
        children = set(rnd.sample(below, min(len(below), 2)))
        pos = CandidatePosition(parents={parent}, children=children)
        t2 = insert_concept(t, Concept("new", ("brand", "new")), pos)
        assert nx.is_directed_acyclic_graph(to_nx(t2))
        for c in children:
            assert c in t2.descendants(parent)
            assert c in t2.descendants("new")

    def test_remove_concepts(self, proteins):
        t2 = remove_concepts(proteins, ["n4"])
        assert "n4" not in t2
        assert all("n4" not in e for e in t2.edges)
        assert len(t2) == 4

    def test_induced_subtaxonomy(self, proteins):
        sub = induced_subtaxonomy(proteins, ["n1", "n2", "n3"])
        assert sub.concept_ids == ["n1", "n2", "n3"]
        assert sub.edges == {("n1", "n2"), ("n2", "n3")}


# -- splitting ----------------------------------------------------------------

def star(n: int) -> Taxonomy:
    concepts = [Concept(f"c{i}", (f"tok{i}",)) for i in range(n)]
    edges = [(f"c0", f"c{i}") for i in range(1, n)]
    return Taxonomy(concepts, edges)


class TestSplit:
    def test_sizes_60(self):
        train, val, test = split_taxonomy(star(60), seed=7)
        assert (len(train), len(val), len(test)) == (36, 12, 12)

    def test_sizes_5(self):
        train, val, test = split_taxonomy(star(5), seed=0)
        assert (len(train), len(val), len(test)) == (3, 1, 1)

    def test_deterministic(self):
        t = star(40)
        assert split_taxonomy(t, seed=3) == split_taxonomy(t, seed=3)

    def test_seed_changes_split(self):
        t = star(40)
        assert split_taxonomy(t, seed=3) != split_taxonomy(t, seed=4)

    def test_too_small(self):
        with pytest.raises(TaxonomyTooSmall):
            split_taxonomy(star(4), seed=0)

    def test_root_in_train(self):
        for seed in range(5):
            train, _, _ = split_taxonomy(star(20), seed=seed)
            assert "c0" in train

    @given(dags(min_nodes=6, max_nodes=20), st.integers(0, 10))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, t, seed):
        non_root = set(t.concept_ids) - t.roots()
        n_part = 2 * int(round(len(t) / 5))
        if n_part > len(non_root):
            with pytest.raises(TaxonomyTooSmall):
                split_taxonomy(t, seed)
            return
        train, val, test = split_taxonomy(t, seed)
        assert train | val | test == set(t.concept_ids)
        assert not (train & val or train & test or val & test)
        assert t.roots() <= train
        assert (val | test) <= non_root


# -- vocabulary ---------------------------------------------------------------

class TestVocabulary:
    def test_reserved_indices(self):
        v = TokenVocabulary()
        assert v.tokens[:4] == ["[MASK]", "[EOS]", "[UNK]", "[PAD]"]
        assert (v.mask_id, v.eos_id, v.unk_id, v.pad_id) == (0, 1, 2, 3)

    def test_bijection(self):
        v = TokenVocabulary(["beta", "alpha", "beta"])
        assert len(v) == 6  # 4 reserved + 2 distinct
        for i, tok in enumerate(v.tokens):
            assert v.index(tok) == i
            assert v.token(i) == tok

    def test_oov_maps_to_unk(self):
        v = TokenVocabulary(["alpha"])
        assert v.index("missing") == v.unk_id
        assert v.encode(["alpha", "missing"]) == [4, 2]

    def test_decode(self):
        v = TokenVocabulary(["alpha", "beta"])
        assert v.decode([4, 5, 1]) == ("alpha", "beta", "[EOS]")

    def test_build_from_taxonomy(self, proteins):
        v = build_vocabulary(proteins)
        for tok in ("proteins", "membrane", "bacterial", "outer", "porins",
                    "transport"):
            assert tok in v
        # Name tokens are sorted after the reserved block.
        names = sorted(proteins.name_tokens())
        assert v.tokens[4:] == names

    def test_corpus_tokens_filtered_by_frequency(self, proteins):
        v = build_vocabulary(proteins, {"common": 5, "rare": 1}, min_freq=2)
        assert "common" in v
        assert "rare" not in v
