"""Confusion-matrix bookkeeping and mean IoU."""

from dataclasses import dataclass

import numpy as np

from .errors import ClassOutOfRange, ShapeMismatch

IGNORE_LABEL = 255


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[gt, pred] over scored pixels; ``rejected[gt]`` tallies pixels
    the prediction marked 255 (used only by the strict scoring mode)."""

    counts: np.ndarray  # (C, C) int64
    rejected: np.ndarray  # (C,) int64

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.num_classes != other.num_classes:
            raise ShapeMismatch("confusion matrices differ in class count")
        return ConfusionMatrix(self.counts + other.counts, self.rejected + other.rejected)


def confusion_matrix(num_classes: int) -> ConfusionMatrix:
    """Empty matrix for ``num_classes`` classes (background included)."""
    if num_classes < 1:
        raise ValueError("need at least one class")
    return ConfusionMatrix(
        counts=np.zeros((num_classes, num_classes), dtype=np.int64),
        rejected=np.zeros(num_classes, dtype=np.int64),
    )


def accumulate(cm: ConfusionMatrix, pred: np.ndarray, gt: np.ndarray) -> ConfusionMatrix:
    """Count pixels into a new matrix. Pixels with gt == 255 are never scored;
    pixels with pred == 255 go to ``rejected`` instead of ``counts``."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    c = cm.num_classes
    for name, arr in (("pred", pred), ("gt", gt)):
        bad = (arr != IGNORE_LABEL) & (arr >= c)
        if bad.any():
            raise ClassOutOfRange(f"{name} contains id {int(arr[bad].max())} >= {c}")
    scored = (gt != IGNORE_LABEL) & (pred != IGNORE_LABEL)
    idx = gt[scored].astype(np.int64) * c + pred[scored].astype(np.int64)
    counts = np.bincount(idx, minlength=c * c).reshape(c, c)
    dropped = (gt != IGNORE_LABEL) & (pred == IGNORE_LABEL)
    rejected = np.bincount(gt[dropped].astype(np.int64), minlength=c)
    return ConfusionMatrix(cm.counts + counts, cm.rejected + rejected)


def miou(cm: ConfusionMatrix, count_ignored_as_error: bool = False):
    """Per-class IoU and their mean.

    IoU_c = counts[c, c] / (row_c + col_c - counts[c, c]); with
    ``count_ignored_as_error`` the pixels the prediction refused (255) are
    added to the class's union. Classes with an empty union are NaN and are
    left out of the mean; the mean itself is NaN when no class is defined.
    """
    diag = np.diag(cm.counts).astype(np.float64)
    union = cm.counts.sum(axis=1) + cm.counts.sum(axis=0) - np.diag(cm.counts)
    if count_ignored_as_error:
        union = union + cm.rejected
    union = union.astype(np.float64)
    per_class = np.full(cm.num_classes, np.nan)
    defined = union > 0
    per_class[defined] = diag[defined] / union[defined]
    mean = float(per_class[defined].mean()) if defined.any() else float("nan")
    return per_class, mean
