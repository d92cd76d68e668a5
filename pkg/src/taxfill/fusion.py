"""Pooling of sentence vectors, mixing of the two graph vectors, and the
final combination feeding both output heads."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor, concat, maximum, softmax, tanh
from .errors import ConfigError, NoContext, ShapeError

FUSION_STRATEGIES = ("mean", "max", "attention", "concat")


@dataclass
class FusedState:
    """Everything downstream heads consume, plus the mixing weights for
    inspection (weights as plain floats, vectors as graph tensors)."""

    h_seq: Tensor
    v_graph: Tensor
    v_fuse: Tensor
    attn_weights: np.ndarray
    beta: float


def fuse_sentences(states: Sequence[Tensor], w_seq: Tensor) -> tuple[Tensor, Tensor]:
    """Attention-pool sentence vectors: weights = softmax over tanh scores,
    output = the weighted sum (a convex combination of the inputs)."""
    if not states:
        raise NoContext("no sentence states to fuse")
    scores = concat([tanh(w_seq @ h) for h in states])
    weights = softmax(scores)
    pooled = None
    for i, h in enumerate(states):
        term = weights[i : i + 1] * h
        pooled = term if pooled is None else pooled + term
    return pooled, weights


def two_way_softmax(first: Tensor, second: Tensor) -> Tensor:
    """Softmax over two scalar scores; returns the first's weight, shape (1,)."""
    return softmax(concat([first, second]))[0:1]


def fuse_graphs(
    v_down: Tensor, v_up: Tensor, w_down: Tensor, w_up: Tensor
) -> tuple[Tensor, Tensor]:
    """Convex mix of the two graph vectors: beta from a two-way softmax over
    tanh scores of each side."""
    if v_down.shape != v_up.shape:
        raise ShapeError(
            f"fuse_graphs: sides differ: {v_down.shape} vs {v_up.shape}"
        )
    score_down = tanh(w_down @ v_down)
    score_up = tanh(w_up @ v_up)
    beta = two_way_softmax(score_down, score_up)
    mixed = beta * v_down + (1.0 - beta) * v_up
    return mixed, beta


def fuse_all(
    h_seq: Tensor,
    v_graph: Tensor,
    strategy: str = "concat",
    proj: Tensor | None = None,
    w_mix: Tensor | None = None,
) -> Tensor:
    """Combine the sentence and graph representations.

    ``concat`` keeps both intact (dim = sum); the aligned strategies first
    project v_graph up to h_seq's width with ``proj``, then mix elementwise
    (mean, max) or by a learned two-way attention (``w_mix`` scores).
    """
    if strategy not in FUSION_STRATEGIES:
        raise ConfigError(
            f"unknown fusion strategy {strategy!r}; pick one of {FUSION_STRATEGIES}"
        )
    if strategy == "concat":
        return concat([h_seq, v_graph])
    if proj is None:
        raise ConfigError(f"fusion strategy {strategy!r} needs a projection matrix")
    aligned = proj @ v_graph
    if strategy == "mean":
        return (h_seq + aligned) * 0.5
    if strategy == "max":
        return maximum(h_seq, aligned)
    if w_mix is None:
        raise ConfigError("attention fusion needs scoring weights")
    weight = two_way_softmax(tanh(w_mix @ h_seq), tanh(w_mix @ aligned))
    return weight * h_seq + (1.0 - weight) * aligned


def fused_dim(strategy: str, seq_dim: int, graph_dim: int) -> int:
    """Width of fuse_all's output for the given strategy."""
    if strategy not in FUSION_STRATEGIES:
        raise ConfigError(f"unknown fusion strategy {strategy!r}")
    return seq_dim + graph_dim if strategy == "concat" else seq_dim
