"""Evaluation metrics for labeled detector scores.

Conventions, used consistently everywhere:

- The positive class is the synthetic one (fake/spoof).
- FAR(t) is the fraction of negatives with score >= t, FRR(t) the fraction
  of positives with score < t.
- AUC is the Mann-Whitney rank statistic, ties counted one half.
- EER sweeps every distinct score as a threshold (plus a reject-all
  sentinel) and linearly interpolates the FAR and FRR step functions
  between adjacent thresholds when they do not cross exactly.
- DCF(t) = c_miss * p_target * P_miss(t) + c_fa * (1 - p_target) * P_fa(t),
  normalized by min(c_miss * p_target, c_fa * (1 - p_target)); minDCF is
  its minimum over the same threshold sweep. Default parameters
  (p_target=0.01, unit costs) are recorded in every report.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMatrix, InvalidArgument, SingleClass, ValidationFailure

_POSITIVE_TOKENS = {"positive", "spoof", "fake", "1"}
_NEGATIVE_TOKENS = {"negative", "bonafide", "real", "0"}


@dataclass(frozen=True)
class ScoreSet:
    """Parallel score/label arrays; labels True for the positive class."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=bool)
        if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
            raise ValidationFailure("scores and labels must be equal-length 1-D arrays")
        if not np.all(np.isfinite(scores)):
            raise ValidationFailure("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def require_both_classes(self):
        if not self.labels.any() or self.labels.all():
            raise SingleClass("need at least one positive and one negative score")


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts, rows true class, columns predicted class."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InvalidArgument("confusion matrix must be square")
        if counts.shape[0] != len(self.class_names):
            raise InvalidArgument("class name count must match matrix size")
        if (counts < 0).any():
            raise InvalidArgument("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(self.class_names))


@dataclass(frozen=True)
class DcfParams:
    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise InvalidArgument("p_target must lie in (0, 1)")
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise InvalidArgument("costs must be positive")


def confusion_metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, per-class precision/recall/F1, and unweighted macro averages.

    Precision of class k is cm[k,k] over its column sum (0 when the column
    is empty), recall over its row sum, F1 their harmonic mean.
    """
    counts = cm.counts
    total = int(counts.sum())
    if total == 0:
        raise EmptyMatrix("confusion matrix has no observations")
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    diag = np.diag(counts).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    pr_sum = precision + recall
    f1 = np.divide(
        2.0 * precision * recall, pr_sum, out=np.zeros_like(diag), where=pr_sum > 0
    )
    per_class = {
        name: {"precision": float(precision[k]), "recall": float(recall[k]), "f1": float(f1[k])}
        for k, name in enumerate(cm.class_names)
    }
    return {
        "accuracy": float(diag.sum() / total),
        "per_class": per_class,
        "macro_precision": float(precision.mean()),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
    }


def _average_ranks(x: np.ndarray) -> np.ndarray:
    # 1-based ranks, ties get the average rank of their run
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    smaller = np.concatenate(([0], np.cumsum(counts)))[:-1]
    return (smaller + (counts + 1) / 2.0)[inverse]


def _threshold_sweep(s: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FAR/FRR step functions at every distinct score plus a reject-all sentinel."""
    pos = np.sort(s.scores[s.labels])
    neg = np.sort(s.scores[~s.labels])
    thresholds = np.unique(s.scores)
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    # counts via binary search on the sorted class scores
    far = (len(neg) - np.searchsorted(neg, thresholds, side="left")) / len(neg)
    frr = np.searchsorted(pos, thresholds, side="left") / len(pos)
    return thresholds, far, frr


def roc_auc(s: ScoreSet) -> dict:
    """AUC plus the ROC polyline sampled at every distinct threshold."""
    s.require_both_classes()
    ranks = _average_ranks(s.scores)
    n_pos = int(s.labels.sum())
    n_neg = int((~s.labels).sum())
    rank_sum = float(ranks[s.labels].sum())
    auc = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    thresholds, far, frr = _threshold_sweep(s)
    return {
        "auc": float(auc),
        "thresholds": thresholds,
        "far": far,
        "tpr": 1.0 - frr,
    }


def eer(s: ScoreSet) -> dict:
    """Equal error rate and its threshold from the FAR/FRR crossing."""
    s.require_both_classes()
    thresholds, far, frr = _threshold_sweep(s)
    diff = far - frr
    # far starts at 1 (frr 0) and the sentinel forces far 0 / frr 1,
    # so a sign change always exists
    idx = int(np.argmax(diff <= 0))
    if diff[idx] == 0:
        return {"eer": float(far[idx]), "threshold": float(thresholds[idx])}
    d0, d1 = diff[idx - 1], diff[idx]
    lam = d0 / (d0 - d1)
    value = far[idx - 1] + lam * (far[idx] - far[idx - 1])
    threshold = thresholds[idx - 1] + lam * (thresholds[idx] - thresholds[idx - 1])
    return {"eer": float(value), "threshold": float(threshold)}


def min_dcf(s: ScoreSet, p: DcfParams = DcfParams()) -> dict:
    """Minimum normalized detection cost over the threshold sweep."""
    s.require_both_classes()
    thresholds, far, frr = _threshold_sweep(s)
    dcf = p.c_miss * p.p_target * frr + p.c_fa * (1.0 - p.p_target) * far
    dcf /= min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target))
    idx = int(np.argmin(dcf))
    return {"min_dcf": float(dcf[idx]), "threshold": float(thresholds[idx])}


@dataclass(frozen=True)
class ReportSection:
    title: str
    rows: tuple = field(default_factory=tuple)  # (label, value) pairs


def _format_value(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.4f}"
    return str(value)


def report(sections: list[ReportSection]) -> dict:
    """Fixed-width text and CSV renderings, identical bytes on identical input."""
    if not sections:
        raise InvalidArgument("report needs at least one metric section")
    text = io.StringIO()
    csv = io.StringIO()
    csv.write("section,metric,value\n")
    for section in sections:
        text.write(section.title + "\n")
        text.write("-" * len(section.title) + "\n")
        width = max((len(str(label)) for label, _ in section.rows), default=0)
        for label, value in section.rows:
            rendered = _format_value(value)
            text.write(f"{str(label):<{width}}  {rendered}\n")
            csv.write(f"{section.title},{label},{rendered}\n")
        text.write("\n")
    return {"text": text.getvalue(), "csv": csv.getvalue()}


def confusion_section(title: str, cm: ConfusionMatrix) -> ReportSection:
    """Standard section layout for a confusion matrix and its derived metrics."""
    m = confusion_metrics(cm)
    rows = [("accuracy", m["accuracy"])]
    for name in cm.class_names:
        stats = m["per_class"][name]
        rows.append((f"{name} precision", stats["precision"]))
        rows.append((f"{name} recall", stats["recall"]))
        rows.append((f"{name} f1", stats["f1"]))
    rows.append(("macro precision", m["macro_precision"]))
    rows.append(("macro recall", m["macro_recall"]))
    rows.append(("macro f1", m["macro_f1"]))
    return ReportSection(title=title, rows=tuple(rows))


def score_set_section(title: str, s: ScoreSet, p: DcfParams = DcfParams()) -> ReportSection:
    rows = (
        ("auc", roc_auc(s)["auc"]),
        ("eer", eer(s)["eer"]),
        ("min_dcf", min_dcf(s, p)["min_dcf"]),
        ("dcf p_target", p.p_target),
        ("dcf c_miss", p.c_miss),
        ("dcf c_fa", p.c_fa),
        ("positives", int(s.labels.sum())),
        ("negatives", int((~s.labels).sum())),
    )
    return ReportSection(title=title, rows=rows)


def parse_score_file(text: str) -> ScoreSet:
    """Parse ``utterance-id<TAB>label<TAB>score`` lines into a ScoreSet."""
    scores: list[float] = []
    labels: list[bool] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValidationFailure(f"line {lineno}: expected 3 tab-separated fields")
        _, label, score = parts
        token = label.strip().lower()
        if token in _POSITIVE_TOKENS:
            labels.append(True)
        elif token in _NEGATIVE_TOKENS:
            labels.append(False)
        else:
            raise ValidationFailure(f"line {lineno}: unknown label {label!r}")
        try:
            scores.append(float(score))
        except ValueError as exc:
            raise ValidationFailure(f"line {lineno}: bad score {score!r}") from exc
    if not scores:
        raise ValidationFailure("score file is empty")
    return ScoreSet(scores=np.array(scores), labels=np.array(labels))
