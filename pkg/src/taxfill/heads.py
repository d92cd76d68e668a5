"""Output heads: a position-validity classifier and a name generator.

The classifier is a three-layer feed-forward network ending in a sigmoid.
The generator is a single GRU whose hidden state starts from the pooled
sentence vector and is re-conditioned on the graph vector at every step; a
tanh readout over (previous embedding ⊕ state ⊕ fused vector) produces token
logits.  [MASK] and [PAD] are structurally excluded from the output
distribution, so generated names can never contain them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ParameterStore,
    Tensor,
    clip,
    concat,
    cross_entropy,
    dropout,
    gru_cell,
    linear,
    log,
    rows,
    sigmoid,
    tanh,
    tsum,
)
from .encoders import uniform_init
from .taxonomy import TokenVocabulary


class ClassifierHead:
    """Feed-forward probability that a candidate position is valid."""

    def __init__(self, in_dim: int, hidden1: int = 128, hidden2: int = 64,
                 prefix: str = "clf"):
        self.in_dim = in_dim
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.prefix = prefix

    def register(self, store: ParameterStore, rng: np.random.Generator) -> None:
        p = self.prefix
        store.add(p + ".w1", uniform_init(rng, (self.hidden1, self.in_dim), self.in_dim))
        store.add(p + ".b1", np.zeros(self.hidden1))
        store.add(p + ".w2", uniform_init(rng, (self.hidden2, self.hidden1), self.hidden1))
        store.add(p + ".b2", np.zeros(self.hidden2))
        store.add(p + ".w3", uniform_init(rng, (1, self.hidden2), self.hidden2))
        store.add(p + ".b3", np.zeros(1))

    def probability(self, store: ParameterStore, v_in: Tensor) -> Tensor:
        p = self.prefix
        h1 = tanh(linear(store[p + ".w1"], v_in, store[p + ".b1"]))
        h2 = tanh(linear(store[p + ".w2"], h1, store[p + ".b2"]))
        return sigmoid(linear(store[p + ".w3"], h2, store[p + ".b3"]))


def classify_position(v_fuse: Tensor, head: ClassifierHead,
                      store: ParameterStore) -> Tensor:
    """Probability in (0,1), shape (1,), that the position should be filled."""
    return head.probability(store, v_fuse)


def loss_l1(p_valid: Tensor, y: int) -> Tensor:
    """Binary cross-entropy with inputs clamped away from 0 and 1."""
    p = clip(p_valid, 1e-7, 1.0 - 1e-7)
    term = log(p) if y == 1 else log(1.0 - p)
    return -tsum(term)


class GeneratorHead:
    """Recurrent name decoder with per-step graph conditioning."""

    def __init__(self, vocab_size: int, d_tok: int, hidden: int, graph_dim: int,
                 fuse_dim: int, readout_hidden: int = 200, max_len: int = 12,
                 prefix: str = "gen"):
        self.vocab_size = vocab_size
        self.d_tok = d_tok
        self.hidden = hidden
        self.graph_dim = graph_dim
        self.fuse_dim = fuse_dim
        self.readout_hidden = readout_hidden
        self.max_len = max_len
        self.prefix = prefix

    def register(self, store: ParameterStore, rng: np.random.Generator) -> None:
        p, h = self.prefix, self.hidden
        cond_in = h + self.graph_dim
        store.add(p + ".cond.w", uniform_init(rng, (h, cond_in), cond_in))
        store.add(p + ".cond.b", np.zeros(h))
        store.add(p + ".gru.w", uniform_init(rng, (3 * h, self.d_tok), self.d_tok))
        store.add(p + ".gru.u", uniform_init(rng, (3 * h, h), h))
        store.add(p + ".gru.bi", uniform_init(rng, (3 * h,), h))
        store.add(p + ".gru.bh", uniform_init(rng, (3 * h,), h))
        read_in = self.d_tok + h + self.fuse_dim
        store.add(p + ".read.w", uniform_init(rng, (self.readout_hidden, read_in), read_in))
        store.add(p + ".read.b", np.zeros(self.readout_hidden))
        store.add(p + ".out.w",
                  uniform_init(rng, (self.vocab_size, self.readout_hidden),
                               self.readout_hidden))
        store.add(p + ".out.b", np.zeros(self.vocab_size))

    def step(
        self,
        store: ParameterStore,
        embeddings: Tensor,
        prev_token: int,
        h_prev: Tensor,
        v_graph: Tensor,
        v_fuse: Tensor,
        training: bool = False,
        drop_rate: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        """One decode step: returns (new hidden state, token logits)."""
        p = self.prefix
        prev_emb = rows(embeddings, [prev_token])[0]
        conditioned = tanh(
            linear(store[p + ".cond.w"], concat([h_prev, v_graph]),
                   store[p + ".cond.b"])
        )
        h_new = gru_cell(prev_emb, conditioned, store[p + ".gru.w"],
                         store[p + ".gru.u"], store[p + ".gru.bi"],
                         store[p + ".gru.bh"])
        read_in = concat([prev_emb, h_new, v_fuse])
        readout = tanh(linear(store[p + ".read.w"], read_in, store[p + ".read.b"]))
        if training:
            readout = dropout(readout, drop_rate, training, rng)
        logits = linear(store[p + ".out.w"], readout, store[p + ".out.b"])
        return h_new, logits


def _blocked_ids(vocab: TokenVocabulary) -> tuple[int, int]:
    return (vocab.mask_id, vocab.pad_id)


def generate_name(
    store: ParameterStore,
    head: GeneratorHead,
    embeddings: Tensor,
    vocab: TokenVocabulary,
    h_seq: Tensor,
    v_graph: Tensor,
    v_fuse: Tensor,
) -> tuple[tuple[str, ...], list[float]]:
    """Greedy decode until [EOS] or the length cap.

    Returns the name tokens (end marker stripped) and the log-probability of
    every emitted step, [EOS] included when it fires.  Ties at the argmax go
    to the lowest token index.
    """
    blocked = _blocked_ids(vocab)
    h = h_seq
    prev = vocab.mask_id
    tokens: list[int] = []
    log_probs: list[float] = []
    for _ in range(head.max_len + 1):
        h, logits = head.step(store, embeddings, prev, h, v_graph, v_fuse)
        scores = logits.data.astype(np.float64).copy()
        scores[list(blocked)] = -np.inf
        shift = scores - scores.max()
        log_z = np.log(np.exp(shift, where=np.isfinite(shift),
                              out=np.zeros_like(shift)).sum())
        choice = int(np.argmax(scores))
        log_probs.append(float(shift[choice] - log_z))
        if choice == vocab.eos_id:
            break
        tokens.append(choice)
        if len(tokens) == head.max_len:
            break
        prev = choice
    return vocab.decode(tokens), log_probs


def loss_l2(
    target_name: tuple[str, ...],
    store: ParameterStore,
    head: GeneratorHead,
    embeddings: Tensor,
    vocab: TokenVocabulary,
    h_seq: Tensor,
    v_graph: Tensor,
    v_fuse: Tensor,
    training: bool = False,
    drop_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    return_final_state: bool = False,
):
    """Teacher-forced negative log-likelihood of the target name plus its
    end marker: one term per target token and one for [EOS]."""
    if len(target_name) == 0:
        raise ValueError("target name must have at least one token")
    blocked = _blocked_ids(vocab)
    targets = vocab.encode(target_name) + [vocab.eos_id]
    h = h_seq
    prev = vocab.mask_id
    total: Tensor | None = None
    for target in targets:
        h, logits = head.step(store, embeddings, prev, h, v_graph, v_fuse,
                              training, drop_rate, rng)
        nll = cross_entropy(logits, target, blocked=blocked)
        total = nll if total is None else total + nll
        prev = target
    if return_final_state:
        return total, h
    return total


@dataclass
class LossBundle:
    """Joint objective over a batch: valid examples contribute classification
    plus weighted generation loss, negatives classification only."""

    l1: Tensor
    l2: Tensor
    joint: Tensor
    lam: float
