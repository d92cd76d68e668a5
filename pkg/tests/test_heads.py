import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from taxfill.autodiff import ParameterStore, Tensor, using_dtype
from taxfill.heads import (
    ClassifierHead,
    GeneratorHead,
    classify_position,
    generate_name,
    loss_l1,
    loss_l2,
)
from taxfill.taxonomy import TokenVocabulary

from gradtools import assert_gradients_match

WORDS = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]


@pytest.fixture
def vocab():
    # 4 reserved + 8 words = 12 entries, of which [MASK]/[PAD] are blocked
    return TokenVocabulary(WORDS)


def make_classifier(in_dim=5, hidden1=4, hidden2=3, seed=0):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    head = ClassifierHead(in_dim, hidden1, hidden2)
    head.register(store, rng)
    return head, store


def make_generator(vocab, d_tok=6, hidden=4, graph_dim=3, fuse_dim=7,
                   readout_hidden=5, max_len=4, seed=0):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    emb = store.add("tok_emb", rng.normal(0, 0.4, (len(vocab), d_tok)))
    head = GeneratorHead(len(vocab), d_tok, hidden, graph_dim, fuse_dim,
                         readout_hidden, max_len)
    head.register(store, rng)
    return head, store, emb


def fresh_inputs(hidden=4, graph_dim=3, fuse_dim=7, seed=1):
    rng = np.random.default_rng(seed)
    h_seq = Tensor(rng.normal(0, 0.5, hidden))
    v_graph = Tensor(rng.normal(0, 0.5, graph_dim))
    v_fuse = Tensor(rng.normal(0, 0.5, fuse_dim))
    return h_seq, v_graph, v_fuse


class TestClassifier:
    def test_probability_shape_and_range(self):
        head, store = make_classifier()
        p = head.probability(store, Tensor(np.linspace(-1, 1, 5)))
        assert p.shape == (1,)
        assert 0.0 < p.data[0] < 1.0

    def test_zeroed_output_layer_sits_on_the_fence(self):
        head, store = make_classifier(seed=9)
        store["clf.w3"].data[:] = 0.0
        store["clf.b3"].data[:] = 0.0
        p = head.probability(store, Tensor(np.ones(5)))
        assert_allclose(p.data, [0.5])

    def test_matches_hand_composition(self):
        head, store = make_classifier(in_dim=2, hidden1=2, hidden2=2)
        store["clf.w1"].data[:] = np.eye(2)
        store["clf.b1"].data[:] = 0.0
        store["clf.w2"].data[:] = np.array([[1.0, 1.0], [0.0, 0.0]])
        store["clf.b2"].data[:] = np.array([0.5, -0.5])
        store["clf.w3"].data[:] = np.array([[2.0, 0.0]])
        store["clf.b3"].data[:] = np.array([0.1])
        x = np.array([0.3, -0.2])
        h1 = np.tanh(x)
        h2 = np.tanh(np.array([h1.sum() + 0.5, -0.5]))
        want = 1.0 / (1.0 + np.exp(-(2.0 * h2[0] + 0.1)))
        p = head.probability(store, Tensor(x))
        assert_allclose(p.data, [want], rtol=1e-6)

    def test_wrapper_is_the_head(self):
        head, store = make_classifier(seed=2)
        x = Tensor(np.linspace(-0.5, 0.5, 5))
        assert_allclose(classify_position(x, head, store).data,
                        head.probability(store, x).data)

    def test_probability_bounded_across_many_inputs(self):
        head, store = make_classifier(seed=4)
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = head.probability(store, Tensor(rng.normal(0, 3, 5)))
            assert 0.0 < p.data[0] < 1.0

    def test_gradients(self):
        with using_dtype(np.float64):
            head, store = make_classifier(seed=7)
            x = Tensor(np.linspace(-0.8, 0.8, 5), requires_grad=True)
            params = [t for _, t in store.items()] + [x]
            assert_gradients_match(
                lambda: loss_l1(head.probability(store, x), 1),
                params, tol=1e-4,
            )


class TestLossL1:
    def test_fence_value_is_log_two(self):
        with using_dtype(np.float64):
            half = Tensor(np.array([0.5]))
            assert_allclose(loss_l1(half, 1).data, math.log(2.0), rtol=1e-12)
            assert_allclose(loss_l1(half, 0).data, math.log(2.0), rtol=1e-12)

    def test_confident_correct_is_cheap_confident_wrong_is_dear(self):
        with using_dtype(np.float64):
            p = Tensor(np.array([0.9]))
            assert_allclose(loss_l1(p, 1).data, -math.log(0.9), rtol=1e-12)
            assert_allclose(loss_l1(p, 0).data, -math.log(0.1), rtol=1e-10)

    def test_saturated_probability_stays_finite(self):
        with using_dtype(np.float64):
            one = Tensor(np.array([1.0]))
            zero = Tensor(np.array([0.0]))
            assert_allclose(loss_l1(one, 0).data, -math.log(1e-7), rtol=1e-6)
            assert_allclose(loss_l1(zero, 1).data, -math.log(1e-7), rtol=1e-6)
        # the clamp must hold in working precision too, where 1 - 1e-7
        # rounds much closer to one
        assert np.isfinite(loss_l1(Tensor(np.array([1.0])), 0).data)
        assert np.isfinite(loss_l1(Tensor(np.array([0.0])), 1).data)


class TestGeneratorStep:
    def test_shapes(self, vocab):
        head, store, emb = make_generator(vocab)
        h_seq, v_graph, v_fuse = fresh_inputs()
        h, logits = head.step(store, emb, vocab.mask_id, h_seq, v_graph, v_fuse)
        assert h.shape == (4,)
        assert logits.shape == (12,)

    def test_graph_vector_conditions_the_state(self, vocab):
        head, store, emb = make_generator(vocab)
        h_seq, v_graph, v_fuse = fresh_inputs()
        other = Tensor(v_graph.data + 1.0)
        h_a, _ = head.step(store, emb, 4, h_seq, v_graph, v_fuse)
        h_b, _ = head.step(store, emb, 4, h_seq, other, v_fuse)
        assert not np.allclose(h_a.data, h_b.data)

    def test_fused_vector_feeds_readout_but_not_the_state(self, vocab):
        head, store, emb = make_generator(vocab)
        h_seq, v_graph, v_fuse = fresh_inputs()
        other = Tensor(v_fuse.data + 1.0)
        h_a, logits_a = head.step(store, emb, 4, h_seq, v_graph, v_fuse)
        h_b, logits_b = head.step(store, emb, 4, h_seq, v_graph, other)
        assert_allclose(h_a.data, h_b.data)
        assert not np.allclose(logits_a.data, logits_b.data)

    def test_previous_token_matters(self, vocab):
        head, store, emb = make_generator(vocab)
        h_seq, v_graph, v_fuse = fresh_inputs()
        _, logits_a = head.step(store, emb, 4, h_seq, v_graph, v_fuse)
        _, logits_b = head.step(store, emb, 5, h_seq, v_graph, v_fuse)
        assert not np.allclose(logits_a.data, logits_b.data)


class TestGenerateName:
    def test_flat_scores_stop_immediately(self, vocab):
        # all-zero logits: ties resolve to the lowest eligible index, which
        # is the end marker, so the name comes out empty
        head, store, emb = make_generator(vocab)
        store["gen.out.w"].data[:] = 0.0
        store["gen.out.b"].data[:] = 0.0
        h_seq, v_graph, v_fuse = fresh_inputs()
        name, log_probs = generate_name(store, head, emb, vocab, h_seq,
                                        v_graph, v_fuse)
        assert name == ()
        assert_allclose(log_probs, [-math.log(10.0)], rtol=1e-6)

    def test_never_emits_reserved_fillers(self, vocab):
        for seed in range(8):
            head, store, emb = make_generator(vocab, seed=seed)
            h_seq, v_graph, v_fuse = fresh_inputs(seed=seed + 100)
            name, _ = generate_name(store, head, emb, vocab, h_seq, v_graph,
                                    v_fuse)
            assert "[MASK]" not in name
            assert "[PAD]" not in name
            assert "[EOS]" not in name

    def test_length_cap(self, vocab):
        head, store, emb = make_generator(vocab, max_len=1, seed=3)
        # push the end marker far down so the cap is what stops decoding
        store["gen.out.b"].data[vocab.eos_id] = -50.0
        h_seq, v_graph, v_fuse = fresh_inputs()
        name, log_probs = generate_name(store, head, emb, vocab, h_seq,
                                        v_graph, v_fuse)
        assert len(name) == 1
        assert len(log_probs) == 1

    def test_log_probs_are_log_probabilities(self, vocab):
        head, store, emb = make_generator(vocab, seed=5)
        h_seq, v_graph, v_fuse = fresh_inputs(seed=6)
        _, log_probs = generate_name(store, head, emb, vocab, h_seq, v_graph,
                                     v_fuse)
        assert all(lp <= 0.0 for lp in log_probs)

    def test_greedy_path_scores_match_teacher_forcing(self, vocab):
        # find a seeding whose decode halts on the end marker, then force
        # its own output: the losses must agree step for step
        for seed in range(30):
            head, store, emb = make_generator(vocab, seed=seed)
            h_seq, v_graph, v_fuse = fresh_inputs(seed=seed)
            name, log_probs = generate_name(store, head, emb, vocab, h_seq,
                                            v_graph, v_fuse)
            if name and len(log_probs) == len(name) + 1:
                nll = loss_l2(name, store, head, emb, vocab, h_seq, v_graph,
                              v_fuse)
                assert_allclose(nll.data, -sum(log_probs), rtol=1e-5)
                return
        pytest.fail("no seed produced a marker-terminated decode")


class TestLossL2:
    def test_flat_scores_cost_log_classes_per_step(self, vocab):
        # 12 entries minus the two blocked fillers leaves 10 classes; a
        # two-token name pays three steps (the end marker is one of them)
        head, store, emb = make_generator(vocab)
        store["gen.out.w"].data[:] = 0.0
        store["gen.out.b"].data[:] = 0.0
        h_seq, v_graph, v_fuse = fresh_inputs()
        nll = loss_l2(("alpha", "beta"), store, head, emb, vocab, h_seq,
                      v_graph, v_fuse)
        assert_allclose(nll.data, 3.0 * math.log(10.0), rtol=1e-6)

    def test_matches_numpy_replay(self, vocab):
        head, store, emb = make_generator(vocab, seed=8)
        h_seq, v_graph, v_fuse = fresh_inputs(seed=9)
        target = ("gamma", "delta", "gamma")
        nll = loss_l2(target, store, head, emb, vocab, h_seq, v_graph, v_fuse)

        total = 0.0
        h, prev = h_seq, vocab.mask_id
        for tid in vocab.encode(target) + [vocab.eos_id]:
            h, logits = head.step(store, emb, prev, h, v_graph, v_fuse)
            scores = logits.data.astype(np.float64).copy()
            scores[[vocab.mask_id, vocab.pad_id]] = -np.inf
            shift = scores - scores[np.isfinite(scores)].max()
            log_z = np.log(np.exp(shift[np.isfinite(shift)]).sum())
            total -= shift[tid] - log_z
            prev = tid
        assert_allclose(nll.data, total, rtol=1e-5)

    def test_unknown_words_price_in_as_unk(self, vocab):
        head, store, emb = make_generator(vocab, seed=8)
        h_seq, v_graph, v_fuse = fresh_inputs(seed=9)
        a = loss_l2(("xylophone",), store, head, emb, vocab, h_seq, v_graph,
                    v_fuse)
        b = loss_l2(("[UNK]",), store, head, emb, vocab, h_seq, v_graph,
                    v_fuse)
        assert_allclose(a.data, b.data)

    def test_empty_target_rejected(self, vocab):
        head, store, emb = make_generator(vocab)
        h_seq, v_graph, v_fuse = fresh_inputs()
        with pytest.raises(ValueError):
            loss_l2((), store, head, emb, vocab, h_seq, v_graph, v_fuse)

    def test_final_state_is_the_replayed_state(self, vocab):
        head, store, emb = make_generator(vocab, seed=10)
        h_seq, v_graph, v_fuse = fresh_inputs(seed=11)
        target = ("zeta", "eta")
        nll, final = loss_l2(target, store, head, emb, vocab, h_seq, v_graph,
                             v_fuse, return_final_state=True)
        only = loss_l2(target, store, head, emb, vocab, h_seq, v_graph, v_fuse)
        assert_allclose(nll.data, only.data)

        h, prev = h_seq, vocab.mask_id
        for tid in vocab.encode(target) + [vocab.eos_id]:
            h, _ = head.step(store, emb, prev, h, v_graph, v_fuse)
            prev = tid
        assert_allclose(final.data, h.data)
        assert not np.allclose(final.data, h_seq.data)

    def test_longer_names_cost_more_under_flat_scores(self, vocab):
        head, store, emb = make_generator(vocab)
        store["gen.out.w"].data[:] = 0.0
        store["gen.out.b"].data[:] = 0.0
        h_seq, v_graph, v_fuse = fresh_inputs()
        short = loss_l2(("alpha",), store, head, emb, vocab, h_seq, v_graph,
                        v_fuse)
        long = loss_l2(("alpha", "beta", "gamma"), store, head, emb, vocab,
                       h_seq, v_graph, v_fuse)
        assert long.data > short.data

    def test_gradients_flow_to_every_piece(self, vocab):
        with using_dtype(np.float64):
            head, store, emb = make_generator(vocab, seed=12)
            rng = np.random.default_rng(13)
            h_seq = Tensor(rng.normal(0, 0.5, 4), requires_grad=True)
            v_graph = Tensor(rng.normal(0, 0.5, 3), requires_grad=True)
            v_fuse = Tensor(rng.normal(0, 0.5, 7), requires_grad=True)
            params = [t for _, t in store.items()] + [h_seq, v_graph, v_fuse]
            assert_gradients_match(
                lambda: loss_l2(("beta", "alpha"), store, head, emb, vocab,
                                h_seq, v_graph, v_fuse),
                params, tol=1e-4,
            )
