"""
Classification quality for sentiment runs

Rows of the confusion matrix are gold classes (positive, negative, neutral);
columns are predicted classes plus a trailing `unknown` column for responses
no label could be parsed from. Unknown predictions count as false negatives
for the gold class and are never a true positive.
"""

import enum
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from errors import EmptyEvaluation, EmptyMatrix, UnknownGold


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    UNKNOWN = "unknown"


CLASS_ORDER: Tuple[Label, ...] = (Label.POSITIVE, Label.NEGATIVE, Label.NEUTRAL)
PREDICTED_ORDER: Tuple[Label, ...] = CLASS_ORDER + (Label.UNKNOWN,)

_LABEL_PATTERN = re.compile(r"positive|negative|neutral", re.IGNORECASE)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    per_class: Dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """3 x 4 count grid: gold class x (predicted class + unknown)."""
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (len(CLASS_ORDER), len(PREDICTED_ORDER)):
            raise ValueError(f"confusion counts must be 3x4, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    @property
    def class_order(self) -> Tuple[Label, ...]:
        return CLASS_ORDER

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def unknown_count(self) -> int:
        return int(self.counts[:, -1].sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def parse_label(response_text: str) -> Label:
    """
    First sentiment word in a free-text response, case-insensitive.

    Example:
        >>> parse_label("NEUTRAL: purely factual information")
        <Label.NEUTRAL: 'neutral'>
        >>> parse_label("I cannot determine this.")
        <Label.UNKNOWN: 'unknown'>
    """
    match = _LABEL_PATTERN.search(response_text or "")
    if match is None:
        return Label.UNKNOWN
    return Label(match.group(0).lower())


def confusion(pairs: Iterable[Tuple[Label, Label]]) -> ConfusionMatrix:
    """
    Tally (gold, predicted) pairs.

    Raises:
        EmptyEvaluation: If there are no pairs
        UnknownGold: If a gold label is unknown
    """
    counts = np.zeros((len(CLASS_ORDER), len(PREDICTED_ORDER)), dtype=np.int64)
    seen = 0
    for gold, predicted in pairs:
        gold, predicted = Label(gold), Label(predicted)
        if gold is Label.UNKNOWN:
            raise UnknownGold(f"gold label of pair {seen} is unknown")
        counts[CLASS_ORDER.index(gold), PREDICTED_ORDER.index(predicted)] += 1
        seen += 1
    if seen == 0:
        raise EmptyEvaluation("no (gold, predicted) pairs to evaluate")
    return ConfusionMatrix(counts)


def _safe_ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """
    Per-class and macro precision, recall and F1, plus accuracy.

    Empty denominators define the metric as 0. Macro values are unweighted
    means over positive, negative and neutral.

    Raises:
        EmptyMatrix: If the matrix holds no pairs
    """
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")

    counts = cm.counts
    per_class: Dict[str, ClassMetrics] = {}
    for i, label in enumerate(CLASS_ORDER):
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum()) - tp
        fn = int(counts[i, :].sum()) - tp
        precision = _safe_ratio(tp, tp + fp)
        recall = _safe_ratio(tp, tp + fn)
        f1 = _safe_ratio(2 * precision * recall, precision + recall)
        per_class[label.value] = ClassMetrics(precision=precision, recall=recall, f1=f1)

    n = len(CLASS_ORDER)
    correct = int(np.trace(counts[:, :n]))
    return MetricsReport(
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / n,
        macro_recall=sum(m.recall for m in per_class.values()) / n,
        macro_f1=sum(m.f1 for m in per_class.values()) / n,
        accuracy=correct / cm.total,
    )
