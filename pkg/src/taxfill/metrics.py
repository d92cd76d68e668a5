"""Scoring for completion runs: precision/recall/F1 over insertions, exact
exact-match generation accuracy split by gold name length, and the
human/machine report renderings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .taxonomy import Taxonomy, normalize_name

if TYPE_CHECKING:
    from .pipeline import CompletionReport

_FLOAT_KEYS = ("precision", "recall", "f1", "acc", "acc_uni", "acc_multi")
_INT_KEYS = ("inserted", "correct", "total_test", "uni_total", "multi_total")


@dataclass(frozen=True)
class MetricsReport:
    """All fractions in [0, 1]; accuracy fields are None when their
    denominator is empty (never silently zero)."""

    precision: float
    recall: float
    f1: float
    acc: float | None
    acc_uni: float | None
    acc_multi: float | None
    inserted: int
    correct: int
    total_test: int
    uni_total: int
    multi_total: int


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _position_agrees(insertion, gold: Taxonomy, cid: str) -> bool:
    return (insertion.position.parents <= gold.parents(cid)
            and insertion.position.children <= gold.children(cid))


def score_completion(predictions: "CompletionReport", gold: Taxonomy,
                     test_ids: set[str]) -> MetricsReport:
    """An insertion counts iff its name matches a test concept's and its
    parent/child sets are within that concept's gold neighborhood."""
    by_name: dict[tuple[str, ...], list[str]] = {}
    for cid in test_ids:
        by_name.setdefault(normalize_name(gold.concept(cid).name), []).append(cid)
    correct = 0
    for insertion in predictions.insertions:
        name = normalize_name(insertion.name)
        if any(_position_agrees(insertion, gold, cid)
               for cid in by_name.get(name, ())):
            correct += 1
    inserted = len(predictions.insertions)
    precision = correct / inserted if inserted else 0.0
    recall = correct / len(test_ids) if test_ids else 0.0
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        acc=None,
        acc_uni=None,
        acc_multi=None,
        inserted=inserted,
        correct=correct,
        total_test=len(test_ids),
        uni_total=0,
        multi_total=0,
    )


def score_generation(
    pairs: Sequence[tuple[tuple[str, ...], tuple[str, ...]]],
) -> tuple[float | None, float | None, float | None]:
    """(acc, acc_uni, acc_multi) for (generated, gold) name pairs; the uni
    and multi slices cover gold names of one token vs several."""
    for _, gold_name in pairs:
        if not gold_name:
            raise ValueError("gold names must be nonempty")
    buckets = {"all": [0, 0], "uni": [0, 0], "multi": [0, 0]}
    for generated, gold_name in pairs:
        hit = normalize_name(generated) == normalize_name(gold_name)
        for key in ("all", "uni" if len(gold_name) == 1 else "multi"):
            buckets[key][0] += int(hit)
            buckets[key][1] += 1

    def rate(key):
        hits, total = buckets[key]
        return hits / total if total else None

    return rate("all"), rate("uni"), rate("multi")


def generation_pairs(predictions: "CompletionReport", gold: Taxonomy,
                     test_ids: set[str]) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Pair each test concept's gold name with the name generated at its
    position (first match wins; no match pairs with the empty name)."""
    pairs = []
    for cid in sorted(test_ids):
        generated: tuple[str, ...] = ()
        for insertion in predictions.insertions:
            if _position_agrees(insertion, gold, cid):
                generated = insertion.name
                break
        pairs.append((generated, gold.concept(cid).name))
    return pairs


def full_report(predictions: "CompletionReport", gold: Taxonomy,
                test_ids: set[str]) -> MetricsReport:
    """Completion scores plus generation accuracy over the test concepts."""
    base = score_completion(predictions, gold, test_ids)
    pairs = generation_pairs(predictions, gold, test_ids)
    acc, acc_uni, acc_multi = score_generation(pairs) if pairs else (None,) * 3
    uni_total = sum(1 for _, g in pairs if len(g) == 1)
    return MetricsReport(
        precision=base.precision,
        recall=base.recall,
        f1=base.f1,
        acc=acc,
        acc_uni=acc_uni,
        acc_multi=acc_multi,
        inserted=base.inserted,
        correct=base.correct,
        total_test=base.total_test,
        uni_total=uni_total,
        multi_total=len(pairs) - uni_total,
    )


# -- rendering -------------------------------------------------------------------


def machine_lines(report: MetricsReport) -> list[str]:
    """One key<TAB>value line per defined field; absent metrics are omitted
    so they cannot be mistaken for zeros."""
    lines = []
    for key in _FLOAT_KEYS:
        value = getattr(report, key)
        if value is not None:
            lines.append(f"{key}\t{value!r}")
    for key in _INT_KEYS:
        lines.append(f"{key}\t{getattr(report, key)}")
    return lines


def parse_machine_block(text: str) -> MetricsReport:
    pairs: dict[str, str] = {}
    for raw in text.splitlines():
        if not raw.strip():
            continue
        key, _, value = raw.partition("\t")
        pairs[key] = value
    kwargs: dict[str, object] = {}
    for key in _FLOAT_KEYS:
        kwargs[key] = float(pairs[key]) if key in pairs else None
    for key in _INT_KEYS:
        kwargs[key] = int(pairs[key])
    return MetricsReport(**kwargs)


def format_table(report: MetricsReport) -> str:
    def show(value):
        return "-" if value is None else f"{value:.4f}"

    rows = [
        ("precision", show(report.precision)),
        ("recall", show(report.recall)),
        ("f1", show(report.f1)),
        ("acc", show(report.acc)),
        ("acc-uni", show(report.acc_uni)),
        ("acc-multi", show(report.acc_multi)),
        ("inserted", str(report.inserted)),
        ("correct", str(report.correct)),
        ("test size", str(report.total_test)),
        ("uni/multi", f"{report.uni_total}/{report.multi_total}"),
    ]
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)
