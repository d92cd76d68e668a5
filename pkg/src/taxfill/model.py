"""Whole-model assembly: parameters, the position encoder shared by both
heads, the joint objective, and checkpoint round-tripping."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import (
    ParameterStore,
    Tensor,
    load_checkpoint,
    no_grad,
    save_checkpoint,
)
from .context import RelationSet, TrainingExample
from .encoders import GraphEncoder, SequenceEncoder
from .errors import ConfigError
from .fusion import FusedState, fuse_all, fuse_graphs, fuse_sentences, fused_dim
from .heads import (
    ClassifierHead,
    GeneratorHead,
    LossBundle,
    generate_name,
    loss_l1,
    loss_l2,
)
from .taxonomy import TokenVocabulary

_ID_SEP = "\x1f"


@dataclass(frozen=True)
class Dims:
    """Layer widths; defaults sized for real corpora, shrink them for toys."""

    d_tok: int = 200
    seq_hidden: int = 200
    seq_layers: int = 3
    graph_hidden: int = 100
    graph_layers: int = 2
    readout_hidden: int = 200
    clf_hidden1: int = 128
    clf_hidden2: int = 64
    max_name_len: int = 12


@dataclass
class ModelState:
    vocab: TokenVocabulary
    dims: Dims
    store: ParameterStore
    node_ids: tuple[str, ...]  # known graph nodes, row order
    fusion_strategy: str = "concat"
    relation_set: RelationSet = field(default_factory=RelationSet)
    k_hops: int = 2
    aggregate: str = "mean"
    directed: bool = True
    classifier_on_final_state: bool = False

    def __post_init__(self):
        self._row = {node: i for i, node in enumerate(self.node_ids)}
        self.seq_enc = SequenceEncoder(self.dims.d_tok, self.dims.seq_hidden,
                                       self.dims.seq_layers)
        self.graph_down = GraphEncoder(self.dims.graph_hidden,
                                       self.dims.graph_layers, side="down",
                                       aggregate=self.aggregate,
                                       directed=self.directed)
        self.graph_up = GraphEncoder(self.dims.graph_hidden,
                                     self.dims.graph_layers, side="up",
                                     aggregate=self.aggregate,
                                     directed=self.directed)
        clf_in = (self.dims.seq_hidden if self.classifier_on_final_state
                  else self.fuse_dim)
        self.classifier = ClassifierHead(clf_in, self.dims.clf_hidden1,
                                         self.dims.clf_hidden2)
        self.generator = GeneratorHead(
            vocab_size=len(self.vocab),
            d_tok=self.dims.d_tok,
            hidden=self.dims.seq_hidden,
            graph_dim=self.dims.graph_hidden,
            fuse_dim=self.fuse_dim,
            readout_hidden=self.dims.readout_hidden,
            max_len=self.dims.max_name_len,
        )

    @property
    def fuse_dim(self) -> int:
        return fused_dim(self.fusion_strategy, self.dims.seq_hidden,
                         self.dims.graph_hidden)

    def node_row(self, node_id: str) -> int:
        """Row in the graph feature tables: known node, anchor, or unknown."""
        n = len(self.node_ids)
        if node_id == "[MASK]":
            return n
        return self._row.get(node_id, n + 1)

    @property
    def embeddings(self) -> Tensor:
        return self.store["tok_emb"]


def build_model(
    vocab: TokenVocabulary,
    node_ids: Sequence[str],
    dims: Dims = Dims(),
    fusion_strategy: str = "concat",
    relation_set: RelationSet = RelationSet(),
    k_hops: int = 2,
    aggregate: str = "mean",
    directed: bool = True,
    classifier_on_final_state: bool = False,
    seed: int = 0,
) -> ModelState:
    """Fresh parameters for every component, deterministically seeded."""
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    model = ModelState(
        vocab=vocab,
        dims=dims,
        store=store,
        node_ids=tuple(node_ids),
        fusion_strategy=fusion_strategy,
        relation_set=relation_set,
        k_hops=k_hops,
        aggregate=aggregate,
        directed=directed,
        classifier_on_final_state=classifier_on_final_state,
    )
    store.add("tok_emb", rng.normal(0.0, 0.1, (len(vocab), dims.d_tok)))
    model.seq_enc.register(store, rng)
    model.graph_down.register(store, rng, len(model.node_ids))
    model.graph_up.register(store, rng, len(model.node_ids))
    store.add("fusion.w_seq",
              rng.uniform(-0.5, 0.5, (1, dims.seq_hidden)))
    store.add("fusion.w_down", rng.uniform(-0.5, 0.5, (1, dims.graph_hidden)))
    store.add("fusion.w_up", rng.uniform(-0.5, 0.5, (1, dims.graph_hidden)))
    if fusion_strategy != "concat":
        store.add("fusion.proj",
                  rng.normal(0.0, 1.0 / np.sqrt(dims.graph_hidden),
                             (dims.seq_hidden, dims.graph_hidden)))
    if fusion_strategy == "attention":
        store.add("fusion.w_mix", rng.uniform(-0.5, 0.5, (1, dims.seq_hidden)))
    model.classifier.register(store, rng)
    model.generator.register(store, rng)
    return model


def encode_position(
    model: ModelState,
    example: TrainingExample,
    training: bool = False,
    drop_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> FusedState:
    """Run both encoders over one example's contexts and fuse the results."""
    store = model.store
    states = [
        model.seq_enc.encode(store, model.embeddings,
                             model.vocab.encode(s.tokens), training, drop_rate, rng)
        for s in example.sentences
    ]
    h_seq, weights = fuse_sentences(states, store["fusion.w_seq"])
    v_down = model.graph_down.encode(store, example.subgraphs.down,
                                     model.node_row, training, drop_rate, rng)
    v_up = model.graph_up.encode(store, example.subgraphs.up, model.node_row,
                                 training, drop_rate, rng)
    v_graph, beta = fuse_graphs(v_down, v_up, store["fusion.w_down"],
                                store["fusion.w_up"])
    v_fuse = fuse_all(
        h_seq,
        v_graph,
        model.fusion_strategy,
        proj=store["fusion.proj"] if "fusion.proj" in store else None,
        w_mix=store["fusion.w_mix"] if "fusion.w_mix" in store else None,
    )
    return FusedState(h_seq=h_seq, v_graph=v_graph, v_fuse=v_fuse,
                      attn_weights=weights.data.copy(), beta=float(beta.data[0]))


def _classifier_input(model: ModelState, fused: FusedState,
                      example: TrainingExample, training: bool,
                      drop_rate: float, rng) -> Tensor:
    if not model.classifier_on_final_state:
        return fused.v_fuse
    if example.target_name is not None:
        _, final = loss_l2(example.target_name, model.store, model.generator,
                           model.embeddings, model.vocab, fused.h_seq,
                           fused.v_graph, fused.v_fuse, training, drop_rate,
                           rng, return_final_state=True)
        return final
    # no target to force: replay the greedy path to its last state
    with no_grad():
        name, log_probs = generate_name(model.store, model.generator,
                                        model.embeddings, model.vocab,
                                        fused.h_seq, fused.v_graph, fused.v_fuse)
    ids = model.vocab.encode(name)
    if len(log_probs) == len(ids) + 1:  # decode finished on the end marker
        ids.append(model.vocab.eos_id)
    h = fused.h_seq
    prev = model.vocab.mask_id
    for token in ids:
        h, _ = model.generator.step(model.store, model.embeddings, prev, h,
                                    fused.v_graph, fused.v_fuse, training,
                                    drop_rate, rng)
        prev = token
    return h


def joint_loss(
    batch: Sequence[TrainingExample],
    model: ModelState,
    lam: float = 2.0,
    training: bool = False,
    drop_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LossBundle:
    """Sum over the batch: valid positions add classification plus lam-weighted
    generation loss; corrupted positions add classification loss only."""
    if not batch:
        raise ValueError("joint_loss needs a nonempty batch")
    l1_total: Tensor | None = None
    l2_total: Tensor = Tensor(np.zeros(()))
    has_l2 = False
    for example in batch:
        fused = encode_position(model, example, training, drop_rate, rng)
        clf_in = _classifier_input(model, fused, example, training, drop_rate, rng)
        p = model.classifier.probability(model.store, clf_in)
        l1 = loss_l1(p, example.validity_label)
        l1_total = l1 if l1_total is None else l1_total + l1
        if example.validity_label == 1:
            l2 = loss_l2(example.target_name, model.store, model.generator,
                         model.embeddings, model.vocab, fused.h_seq,
                         fused.v_graph, fused.v_fuse, training, drop_rate, rng)
            l2_total = l2 if not has_l2 else l2_total + l2
            has_l2 = True
    joint = l1_total + lam * l2_total if has_l2 else l1_total
    return LossBundle(l1=l1_total, l2=l2_total, joint=joint, lam=lam)


def decode_position(model: ModelState, fused: FusedState):
    """Greedy name for an encoded position (no gradients recorded)."""
    with no_grad():
        return generate_name(model.store, model.generator, model.embeddings,
                             model.vocab, fused.h_seq, fused.v_graph,
                             fused.v_fuse)


def position_probability(model: ModelState, fused: FusedState,
                         example: TrainingExample) -> float:
    """Validity probability for an encoded position, through the same
    classifier input the model was trained with (v_fuse, or the decoder's
    final state when ``classifier_on_final_state`` is set)."""
    with no_grad():
        clf_in = _classifier_input(model, fused, example, False, 0.0, None)
        return float(model.classifier.probability(model.store,
                                                  clf_in).data[0])


# -- persistence --------------------------------------------------------------


def save_model(path: str | Path, model: ModelState,
               extra_config: dict[str, str] | None = None) -> None:
    rs = model.relation_set
    config = {
        "d_tok": str(model.dims.d_tok),
        "seq_hidden": str(model.dims.seq_hidden),
        "seq_layers": str(model.dims.seq_layers),
        "graph_hidden": str(model.dims.graph_hidden),
        "graph_layers": str(model.dims.graph_layers),
        "readout_hidden": str(model.dims.readout_hidden),
        "clf_hidden1": str(model.dims.clf_hidden1),
        "clf_hidden2": str(model.dims.clf_hidden2),
        "max_name_len": str(model.dims.max_name_len),
        "fusion_strategy": model.fusion_strategy,
        "k_hops": str(model.k_hops),
        "aggregate": model.aggregate,
        "directed": str(int(model.directed)),
        "classifier_on_final_state": str(int(model.classifier_on_final_state)),
        "rs_parents": str(int(rs.include_parents)),
        "rs_children": str(int(rs.include_children)),
        "rs_siblings": str(int(rs.include_siblings)),
        "rs_parent_hops": str(rs.parent_hops),
        "rs_child_hops": str(rs.child_hops),
        "node_ids": _ID_SEP.join(model.node_ids),
    }
    for key, value in (extra_config or {}).items():
        if key in config:
            raise ConfigError(f"extra config key {key!r} shadows a model key")
        config[key] = value
    save_checkpoint(path, model.vocab.tokens, model.store.arrays(), config)


def load_model(path: str | Path) -> tuple[ModelState, dict[str, str]]:
    """Rebuild a model from a checkpoint; returns it plus any extra config."""
    tokens, arrays, config = load_checkpoint(path)
    vocab = TokenVocabulary(tokens[4:])
    if vocab.tokens != tokens:
        raise ConfigError("checkpoint vocabulary does not start with the "
                          "reserved token block")
    dims = Dims(
        d_tok=int(config.pop("d_tok")),
        seq_hidden=int(config.pop("seq_hidden")),
        seq_layers=int(config.pop("seq_layers")),
        graph_hidden=int(config.pop("graph_hidden")),
        graph_layers=int(config.pop("graph_layers")),
        readout_hidden=int(config.pop("readout_hidden")),
        clf_hidden1=int(config.pop("clf_hidden1")),
        clf_hidden2=int(config.pop("clf_hidden2")),
        max_name_len=int(config.pop("max_name_len")),
    )
    relation_set = RelationSet(
        include_parents=bool(int(config.pop("rs_parents"))),
        include_children=bool(int(config.pop("rs_children"))),
        include_siblings=bool(int(config.pop("rs_siblings"))),
        parent_hops=int(config.pop("rs_parent_hops")),
        child_hops=int(config.pop("rs_child_hops")),
    )
    raw_ids = config.pop("node_ids")
    model = build_model(
        vocab=vocab,
        node_ids=tuple(raw_ids.split(_ID_SEP)) if raw_ids else (),
        dims=dims,
        fusion_strategy=config.pop("fusion_strategy"),
        relation_set=relation_set,
        k_hops=int(config.pop("k_hops")),
        aggregate=config.pop("aggregate"),
        directed=bool(int(config.pop("directed"))),
        classifier_on_final_state=bool(int(config.pop("classifier_on_final_state"))),
    )
    missing = set(model.store.names()) - set(arrays)
    if missing:
        raise ConfigError(f"checkpoint is missing parameters: {sorted(missing)}")
    model.store.load_arrays({k: v for k, v in arrays.items()
                             if k in model.store})
    return model, config
