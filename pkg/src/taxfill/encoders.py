"""Sentence and subgraph encoders.

The sequence side is a stacked bidirectional GRU read out at the mask
position (the last token of every relation sentence).  The graph side runs a
fixed number of aggregate/combine rounds over one subgraph, respecting edge
direction, and reads out the anchor node's final state.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .autodiff import (
    ParameterStore,
    Tensor,
    concat,
    dropout,
    gru_cell,
    leaky_relu,
    linear,
    reshape,
    rows,
    softmax,
    stack,
    tanh,
    tmean,
    tsum,
)
from .context import Subgraph
from .errors import EmptySentence, MissingAnchor

__all__ = ["SequenceEncoder", "GraphEncoder", "uniform_init"]


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class SequenceEncoder:
    """Stacked bidirectional GRU; ``hidden`` units per direction, with the
    two directions concatenated between layers and projected at readout."""

    def __init__(self, d_tok: int, hidden: int, layers: int = 3, prefix: str = "seq"):
        self.d_tok = d_tok
        self.hidden = hidden
        self.layers = layers
        self.prefix = prefix

    def register(self, store: ParameterStore, rng: np.random.Generator) -> None:
        h = self.hidden
        for layer in range(self.layers):
            d_in = self.d_tok if layer == 0 else 2 * h
            for direction in ("f", "b"):
                base = f"{self.prefix}.l{layer}.{direction}"
                store.add(base + ".w", uniform_init(rng, (3 * h, d_in), d_in))
                store.add(base + ".u", uniform_init(rng, (3 * h, h), h))
                store.add(base + ".bi", uniform_init(rng, (3 * h,), h))
                store.add(base + ".bh", uniform_init(rng, (3 * h,), h))
        store.add(f"{self.prefix}.proj.w", uniform_init(rng, (h, 2 * h), 2 * h))
        store.add(f"{self.prefix}.proj.b", np.zeros(h))

    def _run_direction(
        self, store: ParameterStore, inputs: list[Tensor], layer: int, direction: str
    ) -> list[Tensor]:
        base = f"{self.prefix}.l{layer}.{direction}"
        w, u = store[base + ".w"], store[base + ".u"]
        b_i, b_h = store[base + ".bi"], store[base + ".bh"]
        h = Tensor(np.zeros(self.hidden))
        order = range(len(inputs)) if direction == "f" else reversed(range(len(inputs)))
        states: dict[int, Tensor] = {}
        for t in order:
            h = gru_cell(inputs[t], h, w, u, b_i, b_h)
            states[t] = h
        return [states[t] for t in range(len(inputs))]

    def hidden_states(
        self,
        store: ParameterStore,
        embeddings: Tensor,
        token_ids: Sequence[int],
        training: bool = False,
        drop_rate: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> list[Tensor]:
        """Per-position top-layer states (forward ⊕ backward, dim 2·hidden)."""
        if len(token_ids) == 0:
            raise EmptySentence("cannot encode an empty token sequence")
        table = rows(embeddings, list(token_ids))
        inputs = [table[t] for t in range(len(token_ids))]
        for layer in range(self.layers):
            if training and layer > 0:
                inputs = [dropout(x, drop_rate, training, rng) for x in inputs]
            forward = self._run_direction(store, inputs, layer, "f")
            backward = self._run_direction(store, inputs, layer, "b")
            inputs = [concat([f, b]) for f, b in zip(forward, backward)]
        return inputs

    def encode(
        self,
        store: ParameterStore,
        embeddings: Tensor,
        token_ids: Sequence[int],
        training: bool = False,
        drop_rate: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Sentence vector: projected state at the final (mask) position."""
        states = self.hidden_states(store, embeddings, token_ids, training,
                                    drop_rate, rng)
        return tanh(
            linear(store[f"{self.prefix}.proj.w"], states[-1],
                   store[f"{self.prefix}.proj.b"])
        )


class GraphEncoder:
    """K rounds of neighbor aggregation toward the anchor on one subgraph.

    The two sides of a subgraph pair each get their own instance (and thus
    disjoint parameters).  ``side`` fixes which way messages flow: "down"
    aggregates along edges (parent into child), "up" against them.
    """

    def __init__(self, hidden: int, layers: int = 2, side: str = "down",
                 aggregate: str = "mean", directed: bool = True):
        if side not in ("down", "up"):
            raise ValueError(f"side must be 'down' or 'up', got {side!r}")
        if aggregate not in ("mean", "attention"):
            raise ValueError(f"unknown aggregate {aggregate!r}")
        self.hidden = hidden
        self.layers = layers
        self.side = side
        self.aggregate = aggregate
        self.directed = directed
        self.prefix = f"graph.{side}"

    def register(self, store: ParameterStore, rng: np.random.Generator,
                 n_nodes: int) -> None:
        h = self.hidden
        # one free feature row per known node, plus anchor and unknown rows
        store.add(f"{self.prefix}.nodes", rng.normal(0.0, 0.1, (n_nodes + 2, h)))
        for k in range(self.layers):
            base = f"{self.prefix}.l{k}"
            store.add(base + ".w", uniform_init(rng, (h, 2 * h), 2 * h))
            store.add(base + ".attn", uniform_init(rng, (2 * h,), 2 * h))

    def anchor_row(self, n_nodes: int) -> int:
        return n_nodes

    def unknown_row(self, n_nodes: int) -> int:
        return n_nodes + 1

    def _neighbors(self, g: Subgraph) -> dict[str, list[str]]:
        incoming: dict[str, list[str]] = {node: [] for node in g.nodes}
        for parent, child in sorted(g.edges):
            if self.side == "down" or not self.directed:
                incoming[child].append(parent)
            if self.side == "up" or not self.directed:
                incoming[parent].append(child)
        return incoming

    def encode(
        self,
        store: ParameterStore,
        g: Subgraph,
        node_row: Callable[[str], int],
        training: bool = False,
        drop_rate: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Anchor state after ``layers`` aggregate/combine rounds (dim hidden)."""
        if g.anchor not in g.nodes:
            raise MissingAnchor(f"anchor {g.anchor!r} not in subgraph nodes")
        order = sorted(g.nodes)
        table = store[f"{self.prefix}.nodes"]
        state: dict[str, Tensor] = {
            node: rows(table, [node_row(node)])[0] for node in order
        }
        incoming = self._neighbors(g)
        zero = Tensor(np.zeros(self.hidden))
        for k in range(self.layers):
            w = store[f"{self.prefix}.l{k}.w"]
            attn = store[f"{self.prefix}.l{k}.attn"]
            fresh: dict[str, Tensor] = {}
            for node in order:
                sources = incoming[node]
                if not sources:
                    agg = zero
                elif self.aggregate == "mean":
                    agg = tmean(stack([state[s] for s in sources]), axis=0)
                else:
                    scores = concat(
                        [_attn_score(attn, state[s], state[node]) for s in sources]
                    )
                    weights = softmax(scores)
                    agg = None
                    for i, s in enumerate(sources):
                        term = weights[i : i + 1] * state[s]
                        agg = term if agg is None else agg + term
                combined = tanh(w @ concat([state[node], agg]))
                if training:
                    combined = dropout(combined, drop_rate, training, rng)
                fresh[node] = combined
            state = fresh
        return state[g.anchor]


def _attn_score(attn: Tensor, source: Tensor, target: Tensor) -> Tensor:
    """GAT-style unnormalized score for one (neighbor, node) pair; shape (1,)."""
    raw = tsum(concat([source, target]) * attn)
    return reshape(leaky_relu(raw), (1,))
