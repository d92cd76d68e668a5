"""End-to-end orchestration: joint training over masked concepts, scoring
plus name generation over enumerated positions, and the iterative
expand-attach loop with a pluggable attachment method."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Protocol, Sequence

import numpy as np

from .autodiff import OptimizerConfig, no_grad, sgd_step
from .context import (
    RelationSet,
    TrainingExample,
    build_training_example,
    enumerate_candidate_positions,
    mask_concept,
    sample_negatives,
)
from .errors import ExtractionContractViolation, NoContext
from .heads import loss_l2
from .model import (
    Dims,
    ModelState,
    build_model,
    decode_position,
    encode_position,
    joint_loss,
    position_probability,
)
from .pretrain import CorpusStore, pretrain_encoder, transfer_weights
from .taxonomy import (
    CandidatePosition,
    Concept,
    Taxonomy,
    build_vocabulary,
    insert_concept,
)

if TYPE_CHECKING:
    from .metrics import MetricsReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or completion run needs, in one place."""

    lam: float = 2.0
    r_neg: float = 0.15
    tau: float = 0.8
    max_iter: int = 2
    k_hops: int = 2
    relation_set: RelationSet = field(default_factory=RelationSet)
    fusion_strategy: str = "concat"
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dims: Dims = field(default_factory=Dims)
    aggregate: str = "mean"
    pretrain_steps: int = 0
    classifier_on_final_state: bool = False

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.r_neg < 0:
            raise ValueError("r_neg must be >= 0")


_SCALARS = {
    "lam": float, "r_neg": float, "tau": float, "max_iter": int,
    "k_hops": int, "fusion_strategy": str, "seed": int, "aggregate": str,
    "pretrain_steps": int,
}


def save_run_config(path: str | Path, cfg: RunConfig) -> None:
    """Flat, diff-friendly key<TAB>value serialization."""
    lines = [f"{key}\t{getattr(cfg, key)}" for key in _SCALARS]
    lines.append(f"classifier_on_final_state\t{int(cfg.classifier_on_final_state)}")
    rs = cfg.relation_set
    lines += [
        f"rs_parents\t{int(rs.include_parents)}",
        f"rs_children\t{int(rs.include_children)}",
        f"rs_siblings\t{int(rs.include_siblings)}",
        f"rs_parent_hops\t{rs.parent_hops}",
        f"rs_child_hops\t{rs.child_hops}",
    ]
    opt = cfg.optimizer
    lines += [f"opt_{name}\t{getattr(opt, name)}"
              for name in ("base_lr", "min_lr", "cycle_epochs", "momentum",
                           "dropout_rate", "epochs")]
    dims = cfg.dims
    lines += [f"dims_{name}\t{getattr(dims, name)}"
              for name in ("d_tok", "seq_hidden", "seq_layers", "graph_hidden",
                           "graph_layers", "readout_hidden", "clf_hidden1",
                           "clf_hidden2", "max_name_len")]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_run_config(path: str | Path) -> RunConfig:
    pairs: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        key, _, value = raw.partition("\t")
        pairs[key] = value
    kwargs = {key: cast(pairs[key]) for key, cast in _SCALARS.items()}
    kwargs["classifier_on_final_state"] = bool(int(pairs["classifier_on_final_state"]))
    kwargs["relation_set"] = RelationSet(
        include_parents=bool(int(pairs["rs_parents"])),
        include_children=bool(int(pairs["rs_children"])),
        include_siblings=bool(int(pairs["rs_siblings"])),
        parent_hops=int(pairs["rs_parent_hops"]),
        child_hops=int(pairs["rs_child_hops"]),
    )
    kwargs["optimizer"] = OptimizerConfig(
        base_lr=float(pairs["opt_base_lr"]),
        min_lr=float(pairs["opt_min_lr"]),
        cycle_epochs=int(pairs["opt_cycle_epochs"]),
        momentum=float(pairs["opt_momentum"]),
        dropout_rate=float(pairs["opt_dropout_rate"]),
        epochs=int(pairs["opt_epochs"]),
    )
    kwargs["dims"] = Dims(**{name: int(pairs[f"dims_{name}"])
                             for name in ("d_tok", "seq_hidden", "seq_layers",
                                          "graph_hidden", "graph_layers",
                                          "readout_hidden", "clf_hidden1",
                                          "clf_hidden2", "max_name_len")})
    return RunConfig(**kwargs)


# -- training -------------------------------------------------------------------


@dataclass
class TrainResult:
    """Trained model plus the run record: per-epoch losses, the concepts
    that offered no context (and were skipped), and which epoch won."""

    model: ModelState
    train_curve: list[float]
    val_curve: list[float]
    skipped_concepts: list[str]
    best_epoch: int


def _masked_examples(
    t: Taxonomy, ids: Iterable[str], cfg: RunConfig
) -> tuple[dict[str, tuple[TrainingExample, Taxonomy, CandidatePosition]], list[str]]:
    """One valid example per concept (built once; hosts are reused for
    negative sampling).  Concepts without any context are skipped."""
    examples = {}
    skipped = []
    for cid in sorted(ids):
        pos, host = mask_concept(t, cid)
        try:
            example = build_training_example(host, pos, t.concept(cid).name,
                                             cfg.relation_set, cfg.k_hops)
        except NoContext:
            skipped.append(cid)
            continue
        examples[cid] = (example, host, pos)
    return examples, skipped


def _negatives(host: Taxonomy, pos: CandidatePosition, cfg: RunConfig,
               rng: np.random.Generator) -> list[TrainingExample]:
    out = []
    for neg in sample_negatives(host, pos, cfg.r_neg, rng):
        try:
            out.append(build_training_example(host, neg, None,
                                              cfg.relation_set, cfg.k_hops))
        except NoContext:
            continue
    return out


def validation_loss(model: ModelState, examples: Sequence[TrainingExample],
                    lam: float) -> float:
    with no_grad():
        return float(joint_loss(examples, model, lam).joint.data)


def masked_generation_accuracy(t: Taxonomy, ids: Iterable[str],
                               model: ModelState,
                               cfg: RunConfig = RunConfig()) -> float:
    """Fraction of concepts whose name the model regenerates exactly when the
    concept is masked out and its position greedily decoded."""
    ids = sorted(ids)
    if not ids:
        raise ValueError("no concepts to score")
    hits = 0
    for cid in ids:
        pos, host = mask_concept(t, cid)
        try:
            example = build_training_example(host, pos, None,
                                             cfg.relation_set, cfg.k_hops)
        except NoContext:
            continue
        with no_grad():
            fused = encode_position(model, example)
        name, _ = decode_position(model, fused)
        hits += int(name == t.concept(cid).name)
    return hits / len(ids)


def train(
    t_train: Taxonomy,
    corpus: CorpusStore | None = None,
    cfg: RunConfig = RunConfig(),
    validation: tuple[Taxonomy, set[str]] | None = None,
    probe: Callable[[int, ModelState], None] | None = None,
    warm_start: ModelState | None = None,
) -> TrainResult:
    """Joint training over masked train concepts.

    Per epoch, the concepts are reshuffled and each is masked once to form a
    valid position; negatives are drawn fresh at ``cfg.r_neg``.  With a
    corpus, the encoder is pretrained on masked mention tokens first; with
    ``warm_start``, the encoder weights of an already-pretrained model are
    copied in instead.  With ``validation`` (a host taxonomy and the ids to
    mask inside it), the checkpoint with the lowest validation joint loss is
    kept; otherwise the final epoch wins.  ``probe`` is called after every
    epoch.
    """
    if corpus is not None and corpus.vocab is not None:
        vocab = corpus.vocab
    elif warm_start is not None:
        vocab = warm_start.vocab
    else:
        vocab = build_vocabulary(t_train)
    model = build_model(
        vocab,
        sorted(t_train.concept_ids),
        cfg.dims,
        fusion_strategy=cfg.fusion_strategy,
        relation_set=cfg.relation_set,
        k_hops=cfg.k_hops,
        aggregate=cfg.aggregate,
        classifier_on_final_state=cfg.classifier_on_final_state,
        seed=cfg.seed,
    )
    rng = np.random.default_rng(cfg.seed)

    if warm_start is not None:
        transfer_weights(warm_start, model)
    if corpus is not None and cfg.pretrain_steps > 0:
        pre_cfg = replace(cfg.optimizer, epochs=cfg.pretrain_steps)
        pretrain_encoder(corpus, model, pre_cfg, seed=cfg.seed)

    examples, skipped = _masked_examples(t_train, t_train.concept_ids, cfg)
    if skipped:
        log.warning("skipped %d concept(s) with no context: %s",
                    len(skipped), ", ".join(skipped))
    if not examples:
        raise NoContext("no train concept offers any context")

    val_examples: list[TrainingExample] = []
    if validation is not None:
        t_val, val_ids = validation
        val_built, val_skipped = _masked_examples(t_val, val_ids, cfg)
        if val_skipped:
            log.warning("validation skipped %d concept(s): %s",
                        len(val_skipped), ", ".join(val_skipped))
        val_rng = np.random.default_rng(cfg.seed + 1)
        for example, host, pos in val_built.values():
            val_examples.append(example)
            val_examples.extend(_negatives(host, pos, cfg, val_rng))

    order = sorted(examples)
    opt = cfg.optimizer
    train_curve: list[float] = []
    val_curve: list[float] = []
    best = (np.inf, -1, None)  # loss, epoch, arrays
    for epoch in range(opt.epochs):
        perm = rng.permutation(len(order))
        epoch_loss = 0.0
        for i in perm:
            example, host, pos = examples[order[int(i)]]
            batch = [example] + _negatives(host, pos, cfg, rng)
            model.store.zero_grad()
            bundle = joint_loss(batch, model, cfg.lam, training=True,
                                drop_rate=opt.dropout_rate, rng=rng)
            bundle.joint.backward()
            sgd_step(model.store, opt, epoch)
            epoch_loss += float(bundle.joint.data)
        train_curve.append(epoch_loss / len(order))
        if val_examples:
            val = validation_loss(model, val_examples, cfg.lam)
            val_curve.append(val)
            if val < best[0]:
                best = (val, epoch, model.store.arrays())
        if probe is not None:
            probe(epoch, model)
    if best[2] is not None:
        model.store.load_arrays(best[2])
        best_epoch = best[1]
    else:
        best_epoch = opt.epochs - 1
    return TrainResult(model, train_curve, val_curve, skipped, best_epoch)


# -- completion ------------------------------------------------------------------


@dataclass(frozen=True)
class Insertion:
    """One accepted generation: what was produced, where, how confidently."""

    name: tuple[str, ...]
    position: CandidatePosition
    p_valid: float
    concept_id: str | None = None

    @property
    def text(self) -> str:
        return " ".join(self.name)


@dataclass(frozen=True)
class IterationStats:
    new_concepts: int
    taxonomy_size: int


@dataclass
class CompletionReport:
    insertions: list[Insertion]
    iterations: list[IterationStats] = field(default_factory=list)
    metrics: "MetricsReport | None" = None
    taxonomy: Taxonomy | None = None
    duplicates: list[Insertion] = field(default_factory=list)


def _fresh_id(t: Taxonomy, counter: int, prefix: str = "gen") -> tuple[str, int]:
    while f"{prefix}{counter:03d}" in t:
        counter += 1
    return f"{prefix}{counter:03d}", counter + 1


def score_position(model: ModelState, t: Taxonomy,
                   pos: CandidatePosition) -> tuple[float, tuple[str, ...]]:
    """(validity probability, greedy name) for one position; NoContext
    propagates to the caller."""
    example = build_training_example(t, pos, None, model.relation_set,
                                     model.k_hops)
    with no_grad():
        fused = encode_position(model, example)
    p = position_probability(model, fused, example)
    name, _ = decode_position(model, fused)
    return p, name


def complete(t: Taxonomy, model: ModelState,
             cfg: RunConfig = RunConfig()) -> CompletionReport:
    """Score every candidate position; where p >= tau, generate a name and
    insert it unless that name already exists (in the taxonomy or from an
    earlier position this run)."""
    report = CompletionReport(insertions=[], taxonomy=t)
    counter = 0
    seen_names = set(t.names())
    current = t
    for pos in enumerate_candidate_positions(t, cfg.k_hops):
        try:
            p, name = score_position(model, t, pos)
        except NoContext:
            continue
        if p < cfg.tau or not name:
            continue
        insertion = Insertion(name=name, position=pos, p_valid=p)
        if name in seen_names:
            report.duplicates.append(insertion)
            continue
        cid, counter = _fresh_id(current, counter)
        current = insert_concept(current, Concept(cid, name), pos)
        seen_names.add(name)
        report.insertions.append(replace(insertion, concept_id=cid))
    report.taxonomy = current
    return report


# -- iterative expansion -----------------------------------------------------------


class ExtractionMethod(Protocol):
    """Anything that can attach a batch of new concepts to a taxonomy."""

    def attach(self, t: Taxonomy, concepts: Sequence[Concept]) -> Taxonomy:
        ...


def builtin_classifier_attach(t: Taxonomy, concepts: Sequence[Concept],
                              model: ModelState) -> Taxonomy:
    """Attach each concept at its best-fitting position: among positions the
    classifier accepts (p >= 0.5), pick the one whose teacher-forced
    generation loss on the concept's own name is lowest."""
    current = t
    for concept in sorted(concepts, key=lambda c: c.id):
        best: tuple[float, CandidatePosition] | None = None
        for pos in enumerate_candidate_positions(current, model.k_hops):
            try:
                example = build_training_example(current, pos, None,
                                                 model.relation_set,
                                                 model.k_hops)
            except NoContext:
                continue
            with no_grad():
                fused = encode_position(model, example)
                if position_probability(model, fused, example) < 0.5:
                    continue
                nll = float(loss_l2(concept.name, model.store, model.generator,
                                    model.embeddings, model.vocab, fused.h_seq,
                                    fused.v_graph, fused.v_fuse).data)
            if best is None or nll < best[0]:
                best = (nll, pos)
        if best is None:
            log.info("no qualifying position for %s; skipped", concept.id)
            continue
        current = insert_concept(current, concept, best[1])
    return current


class ClassifierExtraction:
    """The builtin attachment wrapped as an ExtractionMethod."""

    def __init__(self, model: ModelState):
        self.model = model

    def attach(self, t: Taxonomy, concepts: Sequence[Concept]) -> Taxonomy:
        return builtin_classifier_attach(t, concepts, self.model)


def _check_extraction(before: Taxonomy, after: Taxonomy,
                      offered: Sequence[Concept]) -> None:
    allowed = set(before.concept_ids) | {c.id for c in offered}
    if not set(before.concept_ids) <= set(after.concept_ids):
        raise ExtractionContractViolation("extraction dropped concepts")
    if not set(after.concept_ids) <= allowed:
        raise ExtractionContractViolation(
            f"extraction invented concepts: {sorted(set(after.concept_ids) - allowed)}"
        )
    try:  # revalidate structure, in case attach() bypassed the constructor
        Taxonomy(list(after.concepts()), after.edges)
    except Exception as exc:
        raise ExtractionContractViolation(f"extraction broke the DAG: {exc}")


def gentaxo_plus_plus(
    t0: Taxonomy,
    c0: Sequence[Concept],
    model: ModelState,
    extraction: ExtractionMethod,
    cfg: RunConfig = RunConfig(),
) -> CompletionReport:
    """Alternate generation and attachment until nothing new appears or the
    iteration budget runs out.

    Each round: generate names at accepted positions of the current taxonomy,
    pool them with the carried-over new concepts, drop anything already
    present, attach the rest through ``extraction``.
    """
    report = CompletionReport(insertions=[], taxonomy=t0)
    current = t0
    carried: dict[tuple[str, ...], Concept] = {c.name: c for c in c0}
    counter = 0
    for _ in range(cfg.max_iter):
        generated: dict[tuple[str, ...], Insertion] = {}
        for pos in enumerate_candidate_positions(current, cfg.k_hops):
            try:
                p, name = score_position(model, current, pos)
            except NoContext:
                continue
            if p >= cfg.tau and name and name not in generated:
                generated[name] = Insertion(name=name, position=pos, p_valid=p)
        existing = set(current.names())
        pool = dict(carried)
        for name, insertion in generated.items():
            if name not in pool:
                cid, counter = _fresh_id(current, counter, prefix="new")
                pool[name] = Concept(cid, name)
            report.insertions.append(insertion)
        batch = {name: c for name, c in pool.items() if name not in existing}
        if not batch:
            report.iterations.append(
                IterationStats(0, len(current.concept_ids)))
            break
        offered = [batch[name] for name in sorted(batch)]
        attached = extraction.attach(current, offered)
        _check_extraction(current, attached, offered)
        current = attached
        # anything the method declined to attach stays in play next round
        carried = batch
        report.iterations.append(
            IterationStats(len(offered), len(current.concept_ids)))
    report.taxonomy = current
    return report
