"""Per-class and macro evaluation of six-way multi-label predictions."""

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from src.errors import DegenerateClass, LengthMismatch
from src.fusion.head import EMOTIONS


@dataclass(frozen=True)
class BinaryCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.positives + self.negatives

    def confusion(self) -> list[list[int]]:
        """[[TN, FP], [FN, TP]]: rows are truth, columns predictions."""
        return [[self.tn, self.fp], [self.fn, self.tp]]


def count(preds: Sequence[int], truth: Sequence[int]) -> BinaryCounts:
    tp = tn = fp = fn = 0
    for p, t in zip(preds, truth):
        if t:
            tp, fn = (tp + 1, fn) if p else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if p else (fp, tn + 1)
    return BinaryCounts(tp, tn, fp, fn)


def weighted_accuracy(c: BinaryCounts) -> float:
    """(TP·N/P + TN) / 2N."""
    p, n = c.positives, c.negatives
    if p == 0 or n == 0:
        raise DegenerateClass(f"weighted accuracy needs positives and negatives, got P={p}, N={n}")
    return (c.tp * n / p + c.tn) / (2 * n)


def f1(c: BinaryCounts) -> float:
    denominator = 2 * c.tp + c.fp + c.fn
    return 0.0 if denominator == 0 else 2 * c.tp / denominator


def accuracy(c: BinaryCounts) -> float:
    return 0.0 if c.total == 0 else (c.tp + c.tn) / c.total


@dataclass
class ClassReport:
    label: str
    counts: BinaryCounts
    weighted_accuracy: float | None
    f1: float
    accuracy: float

    @property
    def degenerate(self) -> bool:
        return self.weighted_accuracy is None


@dataclass
class EvalReport:
    classes: list[ClassReport] = field(default_factory=list)

    @property
    def degenerate(self) -> list[str]:
        return [c.label for c in self.classes if c.degenerate]

    @property
    def macro_weighted_accuracy(self) -> float | None:
        """Mean over non-degenerate classes; None when every class is degenerate."""
        values = [c.weighted_accuracy for c in self.classes if not c.degenerate]
        return sum(values) / len(values) if values else None

    @property
    def macro_f1(self) -> float:
        return sum(c.f1 for c in self.classes) / len(self.classes)

    @property
    def macro_accuracy(self) -> float:
        return sum(c.accuracy for c in self.classes) / len(self.classes)

    def to_dict(self) -> dict:
        return {
            "classes": [{"label": c.label, "weighted_accuracy": c.weighted_accuracy, "f1": c.f1,
                         "accuracy": c.accuracy, "degenerate": c.degenerate,
                         "confusion": c.counts.confusion(), "counts": asdict(c.counts)} for c in self.classes],
            "macro": {"weighted_accuracy": self.macro_weighted_accuracy, "f1": self.macro_f1,
                      "accuracy": self.macro_accuracy},
            "degenerate_classes": self.degenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{'class':<14}{'W_Acc':>8}{'F1':>8}{'Acc':>8}   TN   FP   FN   TP"]
        for c in self.classes:
            wacc = "   n/a*" if c.degenerate else f"{c.weighted_accuracy:8.4f}"
            k = c.counts
            lines.append(f"{c.label:<14}{wacc:>8}{c.f1:8.4f}{c.accuracy:8.4f} {k.tn:4d} {k.fp:4d} {k.fn:4d} {k.tp:4d}")
        macro = self.macro_weighted_accuracy
        lines.append(f"{'macro':<14}{'n/a' if macro is None else f'{macro:.4f}':>8}"
                     f"{self.macro_f1:8.4f}{self.macro_accuracy:8.4f}")
        if self.degenerate:
            lines.append("* degenerate (no positives or no negatives), excluded from macro W_Acc: "
                         + ", ".join(self.degenerate))
        return "\n".join(lines)


def evaluate(preds: Sequence[Sequence[int]], truth: Sequence[Sequence[int]],
             labels: Sequence[str] | None = None) -> EvalReport:
    if len(preds) != len(truth):
        raise LengthMismatch(f"{len(preds)} predictions for {len(truth)} labelled samples")
    if any(len(row) != EMOTIONS for row in list(preds) + list(truth)):
        raise LengthMismatch(f"every sample needs {EMOTIONS} labels")
    labels = labels or [f"class{k}" for k in range(EMOTIONS)]
    report = EvalReport()
    for k in range(EMOTIONS):
        counts = count([row[k] for row in preds], [row[k] for row in truth])
        try:
            wacc = weighted_accuracy(counts)
        except DegenerateClass:
            wacc = None
        report.classes.append(ClassReport(labels[k], counts, wacc, f1(counts), accuracy(counts)))
    return report


@dataclass
class HistorySummary:
    """Maximum and average of periodic evaluations."""

    max_weighted_accuracy: float | None
    avg_weighted_accuracy: float | None
    max_f1: float | None
    avg_f1: float | None


def summarize_history(reports: Sequence[EvalReport]) -> HistorySummary:
    waccs = [r.macro_weighted_accuracy for r in reports if r.macro_weighted_accuracy is not None]
    f1s = [r.macro_f1 for r in reports]
    return HistorySummary(max(waccs, default=None), sum(waccs) / len(waccs) if waccs else None,
                          max(f1s, default=None), sum(f1s) / len(f1s) if f1s else None)
