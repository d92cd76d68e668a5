import numpy as np
import pytest
from numpy.testing import assert_allclose

from taxfill.autodiff import ParameterStore, Tensor, tsum, using_dtype
from taxfill.context import ANCHOR, Subgraph, build_subgraphs, mask_concept
from taxfill.encoders import GraphEncoder, SequenceEncoder
from taxfill.errors import EmptySentence, MissingAnchor

from gradtools import assert_gradients_match


def make_sequence(d_tok=3, hidden=2, layers=2, vocab=8, seed=0):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    emb = store.add("tok_emb", rng.normal(0, 0.5, (vocab, d_tok)))
    enc = SequenceEncoder(d_tok, hidden, layers)
    enc.register(store, rng)
    return enc, store, emb


def make_graph(hidden=2, layers=2, side="down", n_nodes=3, seed=0, **kw):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    enc = GraphEncoder(hidden, layers, side=side, **kw)
    enc.register(store, rng, n_nodes)
    return enc, store


class TestSequenceEncoder:
    def test_default_output_dimension_is_200(self):
        enc, store, emb = make_sequence(d_tok=200, hidden=200, layers=3, vocab=10)
        h = enc.encode(store, emb, [4, 5, 6, 0])
        assert h.shape == (200,)

    def test_inference_is_deterministic(self):
        enc, store, emb = make_sequence()
        a = enc.encode(store, emb, [4, 5, 0])
        b = enc.encode(store, emb, [4, 5, 0])
        assert_allclose(a.data, b.data)

    def test_sensitive_to_tokens_before_the_mask(self):
        enc, store, emb = make_sequence(seed=3)
        a = enc.encode(store, emb, [4, 5, 0])
        b = enc.encode(store, emb, [4, 6, 0])
        assert not np.allclose(a.data, b.data)

    def test_zero_parameters_give_zero_vector(self):
        enc, store, emb = make_sequence()
        for name in store.names():
            store[name].data[:] = 0.0
        h = enc.encode(store, emb, [4, 5, 0])
        assert_allclose(h.data, np.zeros(2))

    def test_empty_sentence_rejected(self):
        enc, store, emb = make_sequence()
        with pytest.raises(EmptySentence):
            enc.encode(store, emb, [])

    def test_hidden_states_have_both_directions(self):
        enc, store, emb = make_sequence(hidden=5)
        states = enc.hidden_states(store, emb, [4, 5, 6])
        assert len(states) == 3
        assert all(s.shape == (10,) for s in states)

    def test_gradients_match_finite_differences(self):
        with using_dtype(np.float64):
            enc, store, emb = make_sequence(seed=7)
            probe = Tensor(np.random.default_rng(1).normal(0, 1, 2))
            params = [t for _, t in store.items()]
            assert_gradients_match(
                lambda: tsum(enc.encode(store, emb, [4, 6, 0]) * probe), params
            )

    def test_dropout_changes_training_output_only(self):
        enc, store, emb = make_sequence(layers=3, seed=5)
        clean = enc.encode(store, emb, [4, 5, 0])
        noisy = enc.encode(store, emb, [4, 5, 0], training=True, drop_rate=0.5,
                           rng=np.random.default_rng(0))
        again = enc.encode(store, emb, [4, 5, 0])
        assert not np.allclose(clean.data, noisy.data)
        assert_allclose(clean.data, again.data)


def chain_subgraph():
    return Subgraph(nodes={"a", "b", ANCHOR}, edges={("a", "b"), ("b", ANCHOR)})


def row_map(**named):
    mapping = dict(named)

    def node_row(node_id):
        return mapping[node_id]

    return node_row


class TestGraphEncoder:
    def test_default_output_dimension_is_100(self, proteins):
        pos, host = mask_concept(proteins, "n3")
        pair = build_subgraphs(host, pos, k_hops=2)
        enc, store = make_graph(hidden=100, layers=2, n_nodes=4)
        node_row = row_map(n1=0, n2=1, n4=2, n5=3, **{ANCHOR: 4})
        out = enc.encode(store, pair.down, node_row)
        assert out.shape == (100,)

    def test_anchor_only_subgraph_propagates_zero_aggregates(self):
        enc, store = make_graph(n_nodes=1)
        g = Subgraph(nodes={ANCHOR}, edges=set())
        out = enc.encode(store, g, row_map(**{ANCHOR: 1}))
        table = store["graph.down.nodes"].data
        w0, w1 = store["graph.down.l0.w"].data, store["graph.down.l1.w"].data
        v = table[1]
        zero = np.zeros(2)
        expected = np.tanh(w1 @ np.concatenate(
            [np.tanh(w0 @ np.concatenate([v, zero])), zero]))
        assert_allclose(out.data, expected, rtol=1e-6)

    def test_three_node_chain_matches_hand_propagation(self):
        enc, store = make_graph(n_nodes=2)
        eye_pair = np.hstack([np.eye(2), np.eye(2)])
        store["graph.down.l0.w"].data = eye_pair.copy()
        store["graph.down.l1.w"].data = eye_pair.copy()
        table = store["graph.down.nodes"].data
        va, vb, vm = table[0], table[1], table[2]
        node_row = row_map(a=0, b=1, **{ANCHOR: 2})
        out = enc.encode(store, chain_subgraph(), node_row)
        a1, b1, m1 = np.tanh(va), np.tanh(vb + va), np.tanh(vm + vb)
        expected = np.tanh(m1 + b1)
        assert_allclose(out.data, expected, rtol=1e-6)

    def test_up_side_aggregates_from_children(self):
        enc, store = make_graph(side="up", n_nodes=1)
        g = Subgraph(nodes={ANCHOR, "c"}, edges={(ANCHOR, "c")})
        eye_pair = np.hstack([np.eye(2), np.eye(2)])
        store["graph.up.l0.w"].data = eye_pair.copy()
        store["graph.up.l1.w"].data = eye_pair.copy()
        table = store["graph.up.nodes"].data
        vc, vm = table[0], table[1]
        out = enc.encode(store, g, row_map(c=0, **{ANCHOR: 1}))
        c1, m1 = np.tanh(vc), np.tanh(vm + vc)
        assert_allclose(out.data, np.tanh(m1 + c1), rtol=1e-6)

    def test_missing_anchor_rejected(self):
        enc, store = make_graph()
        with pytest.raises(MissingAnchor):
            enc.encode(store, Subgraph(nodes={"a"}, edges=set()), row_map(a=0))

    def test_down_and_up_parameters_are_disjoint(self):
        rng = np.random.default_rng(0)
        store = ParameterStore()
        GraphEncoder(2, 2, side="down").register(store, rng, 3)
        GraphEncoder(2, 2, side="up").register(store, rng, 3)
        downs = {n for n in store.names() if n.startswith("graph.down")}
        ups = {n for n in store.names() if n.startswith("graph.up")}
        assert downs and ups and not downs & ups

    def test_single_neighbor_attention_equals_mean(self):
        for seed in range(3):
            kwargs = dict(hidden=3, layers=2, n_nodes=2, seed=seed)
            mean_enc, mean_store = make_graph(aggregate="mean", **kwargs)
            attn_enc, attn_store = make_graph(aggregate="attention", **kwargs)
            g = Subgraph(nodes={"a", ANCHOR}, edges={("a", ANCHOR)})
            node_row = row_map(a=0, **{ANCHOR: 2})
            a = mean_enc.encode(mean_store, g, node_row)
            b = attn_enc.encode(attn_store, g, node_row)
            assert_allclose(a.data, b.data, rtol=1e-6)

    def test_identical_neighbors_attention_equals_mean(self):
        kwargs = dict(hidden=3, layers=1, n_nodes=3, seed=4)
        mean_enc, mean_store = make_graph(aggregate="mean", **kwargs)
        attn_enc, attn_store = make_graph(aggregate="attention", **kwargs)
        # two parents sharing one embedding row -> identical states
        g = Subgraph(nodes={"p1", "p2", ANCHOR},
                     edges={("p1", ANCHOR), ("p2", ANCHOR)})
        node_row = row_map(p1=0, p2=0, **{ANCHOR: 3})
        a = mean_enc.encode(mean_store, g, node_row)
        b = attn_enc.encode(attn_store, g, node_row)
        assert_allclose(a.data, b.data, rtol=1e-6)

    def test_undirected_mode_ignores_edge_orientation(self):
        enc, store = make_graph(directed=False, n_nodes=2, seed=8)
        node_row = row_map(a=0, b=1, **{ANCHOR: 2})
        forward = enc.encode(store, chain_subgraph(), node_row)
        flipped = Subgraph(nodes={"a", "b", ANCHOR},
                           edges={("b", "a"), (ANCHOR, "b")})
        backward = enc.encode(store, flipped, node_row)
        assert_allclose(forward.data, backward.data)

    def test_directed_mode_distinguishes_orientation(self):
        enc, store = make_graph(n_nodes=2, seed=8)
        node_row = row_map(a=0, b=1, **{ANCHOR: 2})
        forward = enc.encode(store, chain_subgraph(), node_row)
        flipped = Subgraph(nodes={"a", "b", ANCHOR},
                           edges={("b", "a"), (ANCHOR, "b")})
        backward = enc.encode(store, flipped, node_row)
        assert not np.allclose(forward.data, backward.data)

    @pytest.mark.parametrize("aggregate", ["mean", "attention"])
    def test_gradients_match_finite_differences(self, aggregate):
        with using_dtype(np.float64):
            enc, store = make_graph(hidden=2, layers=2, n_nodes=2, seed=11,
                                    aggregate=aggregate)
            node_row = row_map(a=0, b=1, **{ANCHOR: 2})
            probe = Tensor(np.random.default_rng(2).normal(0, 1, 2))
            params = [t for name, t in store.items()
                      if aggregate == "attention" or ".attn" not in name]
            assert_gradients_match(
                lambda: tsum(enc.encode(store, chain_subgraph(), node_row) * probe),
                params,
            )

    def test_invalid_configuration_rejected(self):
        with pytest.raises(ValueError):
            GraphEncoder(2, 2, side="sideways")
        with pytest.raises(ValueError):
            GraphEncoder(2, 2, aggregate="median")
