"""Command-line surface: corpus ingestion, taxonomy splitting, training,
completion, iterative expansion, evaluation, and ablation sweeps.

Exit codes: 0 success, 1 data error (unreadable or inconsistent inputs),
2 usage error (argparse's own convention).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import TaxfillError
from .fusion import FUSION_STRATEGIES
from .metrics import format_table, full_report, machine_lines
from .model import build_model, load_model, save_model
from .pipeline import (
    ClassifierExtraction,
    CompletionReport,
    Insertion,
    IterationStats,
    RunConfig,
    complete,
    gentaxo_plus_plus,
    load_run_config,
    masked_generation_accuracy,
    save_run_config,
    train,
)
from .context import RelationSet
from .pretrain import ingest_corpus
from .taxonomy import (
    CandidatePosition,
    induced_subtaxonomy,
    load_taxonomy,
    save_taxonomy,
    split_taxonomy,
)

# -- report files ----------------------------------------------------------------


def _insertion_line(kind: str, ins: Insertion) -> str:
    parents = ",".join(sorted(ins.position.parents)) or "-"
    children = ",".join(sorted(ins.position.children)) or "-"
    return "\t".join([kind, ins.concept_id or "-", " ".join(ins.name),
                      repr(ins.p_valid), parents, children])


def write_report(path: str | Path, report: CompletionReport,
                 tau: float | None = None) -> None:
    """Line-delimited structured text: header counts, one line per
    iteration, one line per (accepted or duplicate) insertion."""
    lines = []
    if tau is not None:
        lines.append(f"tau\t{tau!r}")
    lines.append(f"insertions\t{len(report.insertions)}")
    lines.append(f"duplicates\t{len(report.duplicates)}")
    for i, stats in enumerate(report.iterations, start=1):
        lines.append(
            f"iteration\t{i}\t{stats.new_concepts}\t{stats.taxonomy_size}")
    for ins in report.insertions:
        lines.append(_insertion_line("insert", ins))
    for ins in report.duplicates:
        lines.append(_insertion_line("dup", ins))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_id_set(field: str) -> frozenset[str]:
    return frozenset() if field == "-" else frozenset(field.split(","))


def read_report(path: str | Path) -> CompletionReport:
    """Inverse of :func:`write_report` (header counts are re-derived)."""
    report = CompletionReport(insertions=[])
    for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        kind = parts[0]
        if kind in ("tau", "insertions", "duplicates"):
            continue
        if kind == "iteration":
            report.iterations.append(
                IterationStats(int(parts[2]), int(parts[3])))
            continue
        if kind not in ("insert", "dup") or len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: unrecognized report line")
        _, cid, name, p, parents, children = parts
        ins = Insertion(
            name=tuple(name.split()),
            position=CandidatePosition(parents=_parse_id_set(parents),
                                       children=_parse_id_set(children)),
            p_valid=float(p),
            concept_id=None if cid == "-" else cid,
        )
        (report.insertions if kind == "insert" else
         report.duplicates).append(ins)
    return report


def read_id_file(path: str | Path) -> set[str]:
    ids = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            ids.add(line)
    return ids


def write_id_file(path: str | Path, ids: set[str]) -> None:
    Path(path).write_text("\n".join(sorted(ids)) + "\n", encoding="utf-8")


# -- shared plumbing ---------------------------------------------------------------


def _load_inputs(args) -> "Taxonomy":
    return load_taxonomy(args.taxonomy_concepts, args.taxonomy_edges)


def _resolve_config(args) -> RunConfig:
    cfg = (load_run_config(args.config)
           if getattr(args, "config", None) else RunConfig())
    updates = {}
    for attr, field in (("seed", "seed"), ("tau", "tau"),
                        ("r_neg", "r_neg"), ("lam", "lam"),
                        ("k_hops", "k_hops"), ("fusion", "fusion_strategy")):
        value = getattr(args, attr, None)
        if value is not None:
            updates[field] = value
    return replace(cfg, **updates) if updates else cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus(args, t):
    if getattr(args, "corpus", None) is None:
        return None
    corpus, _ = ingest_corpus(args.corpus, t)
    return corpus


# -- subcommands ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    t = _load_inputs(args)
    out = _out_dir(args)
    corpus, vocab = ingest_corpus(args.corpus, t)
    (out / "vocab.txt").write_text("\n".join(vocab.tokens) + "\n",
                                   encoding="utf-8")
    n_spans = sum(len(spans) for spans in corpus.spans)
    summary = [f"sentences\t{len(corpus)}", f"spans\t{n_spans}",
               f"vocab\t{len(vocab)}"]
    (out / "ingest.txt").write_text("\n".join(summary) + "\n",
                                    encoding="utf-8")
    for line in summary:
        print(line)
    return 0


def cmd_split(args) -> int:
    t = _load_inputs(args)
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    train_ids, val_ids, test_ids = split_taxonomy(t, seed)
    for name, ids in (("train_ids.txt", train_ids), ("val_ids.txt", val_ids),
                      ("test_ids.txt", test_ids)):
        write_id_file(out / name, ids)
    print(f"train\t{len(train_ids)}")
    print(f"val\t{len(val_ids)}")
    print(f"test\t{len(test_ids)}")
    return 0


def cmd_pretrain(args) -> int:
    from .pretrain import pretrain_encoder

    t = _load_inputs(args)
    out = _out_dir(args)
    cfg = _resolve_config(args)
    corpus, vocab = ingest_corpus(args.corpus, t)
    model = build_model(
        vocab, sorted(t.concept_ids), cfg.dims,
        fusion_strategy=cfg.fusion_strategy, relation_set=cfg.relation_set,
        k_hops=cfg.k_hops, aggregate=cfg.aggregate,
        classifier_on_final_state=cfg.classifier_on_final_state,
        seed=cfg.seed)
    losses = pretrain_encoder(corpus, model, cfg.optimizer, seed=cfg.seed)
    path = out / "pretrained.ckpt"
    save_model(path, model)
    tail = losses[-20:] if len(losses) >= 20 else losses
    print(f"steps\t{len(losses)}")
    print(f"final_loss\t{sum(tail) / len(tail):.4f}")
    print(f"checkpoint\t{path}")
    return 0


def cmd_train(args) -> int:
    t = _load_inputs(args)
    out = _out_dir(args)
    cfg = _resolve_config(args)
    corpus = _load_corpus(args, t)
    warm = None
    if getattr(args, "checkpoint", None):
        warm, _ = load_model(args.checkpoint)
    result = train(t, corpus=corpus, cfg=cfg, warm_start=warm)
    path = out / "model.ckpt"
    save_model(path, result.model, extra_config={"tau": repr(cfg.tau)})
    save_run_config(out / "run.cfg", cfg)
    (out / "train_curve.txt").write_text(
        "\n".join(repr(v) for v in result.train_curve) + "\n",
        encoding="utf-8")
    print(f"epochs\t{len(result.train_curve)}")
    print(f"final_loss\t{result.train_curve[-1]:.4f}")
    if result.skipped_concepts:
        print(f"skipped\t{','.join(result.skipped_concepts)}")
    print(f"checkpoint\t{path}")
    return 0


def _completion_command(args, runner) -> int:
    t = _load_inputs(args)
    out = _out_dir(args)
    model, extra = load_model(args.checkpoint)
    cfg = _resolve_config(args)
    if getattr(args, "k_hops", None) is None and args.config is None:
        cfg = replace(cfg, k_hops=model.k_hops)
    report = runner(t, model, cfg)
    write_report(out / "report.txt", report, tau=cfg.tau)
    save_taxonomy(report.taxonomy, out / "completed_concepts.tsv",
                  out / "completed_edges.tsv")
    print(f"insertions\t{len(report.insertions)}")
    print(f"duplicates\t{len(report.duplicates)}")
    for i, stats in enumerate(report.iterations, start=1):
        print(f"iteration\t{i}\t{stats.new_concepts}\t{stats.taxonomy_size}")
    print(f"taxonomy_size\t{len(report.taxonomy)}")
    return 0


def cmd_complete(args) -> int:
    return _completion_command(args, complete)


def cmd_gentaxo_pp(args) -> int:
    def runner(t, model, cfg):
        return gentaxo_plus_plus(t, [], model, ClassifierExtraction(model),
                                 cfg)

    return _completion_command(args, runner)


def cmd_evaluate(args) -> int:
    gold = _load_inputs(args)
    predictions = read_report(args.report)
    test_ids = read_id_file(args.test_ids)
    report = full_report(predictions, gold, test_ids)
    print(format_table(report))
    print()
    for line in machine_lines(report):
        print(line)
    return 0


_ABLATION_RELATION_SETS = (
    ("full", RelationSet()),
    ("no-siblings", RelationSet(include_siblings=False)),
    ("parents-only", RelationSet(include_children=False,
                                 include_siblings=False)),
)


def ablation_grid(base: RunConfig):
    """One-axis-at-a-time variants off the base configuration."""
    variants = []
    for strategy in FUSION_STRATEGIES:
        variants.append(("fusion", strategy,
                         replace(base, fusion_strategy=strategy)))
    for k in (1, 2, 3):
        variants.append(("k_hops", str(k), replace(base, k_hops=k)))
    for label, rs in _ABLATION_RELATION_SETS:
        variants.append(("relation_set", label,
                         replace(base, relation_set=rs)))
    for r_neg in (0.0, 0.15, 0.5, 1.0):
        variants.append(("r_neg", format(r_neg, "g"),
                         replace(base, r_neg=r_neg)))
    return variants


def cmd_ablate(args) -> int:
    t = _load_inputs(args)
    out = _out_dir(args)
    base = _resolve_config(args)
    corpus = _load_corpus(args, t)
    train_ids, val_ids, _ = split_taxonomy(t, base.seed)
    t_train = induced_subtaxonomy(t, train_ids)
    rows = []
    for axis, label, cfg in ablation_grid(base):
        result = train(t_train, corpus=corpus, cfg=cfg)
        acc = masked_generation_accuracy(t, val_ids, result.model, cfg)
        rows.append((axis, label, acc))
    width_axis = max(len(axis) for axis, _, _ in rows)
    width_label = max(len(label) for _, label, _ in rows)
    table = [f"{axis:<{width_axis}}  {label:<{width_label}}  {acc:.4f}"
             for axis, label, acc in rows]
    print("\n".join(table))
    (out / "ablation.txt").write_text(
        "\n".join(f"{axis}\t{label}\t{acc!r}" for axis, label, acc in rows)
        + "\n", encoding="utf-8")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxfill",
        description="Taxonomy completion: train, complete, expand, evaluate.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    tax = argparse.ArgumentParser(add_help=False)
    tax.add_argument("--taxonomy-concepts", required=True,
                     help="TSV of id<TAB>concept name")
    tax.add_argument("--taxonomy-edges", required=True,
                     help="TSV of parent_id<TAB>child_id")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out-dir", required=True)

    knobs = argparse.ArgumentParser(add_help=False)
    knobs.add_argument("--config", help="run-config file (key<TAB>value)")
    knobs.add_argument("--seed", type=int)
    knobs.add_argument("--tau", type=float)
    knobs.add_argument("--r-neg", type=float)
    knobs.add_argument("--lambda", dest="lam", type=float)
    knobs.add_argument("--k-hops", type=int)
    knobs.add_argument("--fusion", choices=list(FUSION_STRATEGIES))

    p = sub.add_parser("ingest", parents=[tax, out],
                       help="index a corpus against a taxonomy")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", parents=[tax, out],
                       help="write a 3:1:1 train/val/test id split")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pretrain", parents=[tax, out, knobs],
                       help="masked-token pretraining of the encoder")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", parents=[tax, out, knobs],
                       help="joint training over masked concepts")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint",
                   help="warm-start encoder from a pretrained checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("complete", parents=[tax, out, knobs],
                       help="one-shot completion of a taxonomy")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("gentaxo-pp", parents=[tax, out, knobs],
                       help="iterative expand-attach completion")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_gentaxo_pp)

    p = sub.add_parser("evaluate", parents=[tax],
                       help="score a completion report against gold")
    p.add_argument("--report", required=True)
    p.add_argument("--test-ids", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", parents=[tax, out, knobs],
                       help="sweep fusion/k_hops/relations/r_neg grids")
    p.add_argument("--corpus")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TaxfillError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
