"""
Segmentation losses, evaluation metrics and Welch's t-test.

Counts follow the convention F_{i|j} = pixels predicted i whose truth is j,
stored as matrix[i, j]; the diagonal holds the true positives T_i.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import betainc

from lattice_relax.types import BeliefMap, InvalidInputError, is_simplex

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-12

Probabilities = Union[BeliefMap, np.ndarray]


class DegenerateSampleError(ValueError):
    """Raised when two samples cannot be t-tested (no variance, too few values)."""


@dataclass(frozen=True)
class ConfusionCounts:
    """L x L matrix with matrix[i, j] = pixels predicted i, truth j."""

    matrix: np.ndarray

    @property
    def classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def true_positives(self) -> np.ndarray:
        return np.diag(self.matrix)

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.matrix + other.matrix)


@dataclass(frozen=True)
class LossParams:
    k: float = 0.75
    gamma: float = 2.0
    alpha_focal: float = 0.25


def confusion(pred: np.ndarray, truth: np.ndarray, L: int) -> ConfusionCounts:
    """
    Tally predicted/true label pairs.

    Args:
        pred (np.ndarray): Predicted labels, any shape
        truth (np.ndarray): True labels, same shape
        L (int): Number of classes

    Returns:
        ConfusionCounts: Counts summing to the pixel count

    Raises:
        InvalidInputError: On shape mismatch or labels outside [0, L)
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise InvalidInputError(f"Prediction shape {pred.shape} does not match truth {truth.shape}")
    if pred.size and (min(pred.min(), truth.min()) < 0 or max(pred.max(), truth.max()) >= L):
        raise InvalidInputError(f"Labels must lie in [0, {L})")
    counts = np.bincount((pred * L + truth).ravel(), minlength=L * L)
    return ConfusionCounts(counts.reshape(L, L))


def iou(counts: ConfusionCounts) -> float:
    """
    Aggregate IoU as sum_i T_i / sum_i sum_j (T_i + F_{i|j} + F_{j|i}).

    The double sum runs over all L values of j, so a perfect prediction
    scores 1/L; mean_iou gives the conventional figure.
    """
    m = counts.matrix.astype(np.float64)
    tp = np.diag(m)
    off = m - np.diag(tp)
    denominator = counts.classes * tp.sum() + off.sum() + off.sum()
    return float(tp.sum() / denominator) if denominator > 0 else 0.0


def class_iou(counts: ConfusionCounts, i: int) -> float:
    """Standard per-class IoU T / (T + FP + FN); 0 when the class never occurs."""
    m = counts.matrix
    tp = m[i, i]
    denominator = m[i, :].sum() + m[:, i].sum() - tp
    return float(tp / denominator) if denominator > 0 else 0.0


def mean_iou(counts: ConfusionCounts) -> float:
    """Mean of class_iou over classes predicted or present."""
    m = counts.matrix
    present = [i for i in range(counts.classes) if m[i, :].sum() + m[:, i].sum() > 0]
    if not present:
        return 0.0
    return float(np.mean([class_iou(counts, i) for i in present]))


def precision_recall(counts: ConfusionCounts, i: int, literal: bool = False) -> Tuple[float, float]:
    """
    Precision and recall of class i.

    Args:
        counts (ConfusionCounts): Tallied counts
        i (int): Class index
        literal (bool): Use hits divided by misses (T_i / sum_j F) instead of
            the standard T_i / (T_i + sum_j F); the literal form is unbounded

    Returns:
        Tuple[float, float]: (precision, recall), 0 where a denominator is 0
    """
    if not 0 <= i < counts.classes:
        raise InvalidInputError(f"Class {i} outside [0, {counts.classes})")
    m = counts.matrix
    tp = m[i, i]
    false_pos = m[i, :].sum() - tp
    false_neg = m[:, i].sum() - tp
    if literal:
        precision_den, recall_den = false_pos, false_neg
    else:
        precision_den, recall_den = tp + false_pos, tp + false_neg
    precision = tp / precision_den if precision_den > 0 else 0.0
    recall = tp / recall_den if recall_den > 0 else 0.0
    return float(precision), float(recall)


def one_hot(labels: np.ndarray, L: int) -> np.ndarray:
    """Labels (...) to one-hot (..., L)."""
    return np.eye(L)[np.asarray(labels, dtype=np.int64)]


def _probabilities(probs: Probabilities) -> np.ndarray:
    return probs.data if isinstance(probs, BeliefMap) else np.asarray(probs, dtype=np.float64)


def _check_pair(p: np.ndarray, g: np.ndarray) -> None:
    if p.shape != g.shape:
        raise InvalidInputError(f"Probabilities {p.shape} and one-hot truth {g.shape} differ in shape")


def generalized_dice_loss(probs: Probabilities, truth: np.ndarray) -> float:
    """
    1 - 2 sum_l w_l sum_i g p / sum_l w_l sum_i (g + p), w_l = 1 / (sum_i g)^2.

    Classes absent from the truth get w_l = 0 and drop out of both sums.
    """
    p = _probabilities(probs)
    g = np.asarray(truth, dtype=np.float64)
    _check_pair(p, g)
    if not is_simplex(p):
        raise InvalidInputError("Dice loss needs per-pixel probability distributions")
    p = p.reshape(-1, p.shape[-1])
    g = g.reshape(-1, g.shape[-1])
    area = g.sum(axis=0)
    weights = np.zeros_like(area)
    present = area > 0
    weights[present] = 1.0 / area[present] ** 2
    intersection = (weights * (g * p).sum(axis=0)).sum()
    union = (weights * (g + p).sum(axis=0)).sum()
    if union <= 0:
        return 0.0
    return float(1.0 - 2.0 * intersection / union)


def loss_g(gdl: float, k: float = 0.75) -> float:
    """Reshaped dice loss GDL / (1 + k (1 - GDL))."""
    return gdl / (1.0 + k * (1.0 - gdl))


def focal_loss(probs: Probabilities, truth: np.ndarray, gamma: float = 2.0, alpha_focal: float = 0.25) -> float:
    """Mean over pixel-class entries of -a' (1 - p')^gamma log p'."""
    p = _probabilities(probs)
    g = np.asarray(truth, dtype=np.float64)
    _check_pair(p, g)
    positive = g == 1
    p_true = np.where(positive, p, 1.0 - p)
    weight = np.where(positive, alpha_focal, 1.0 - alpha_focal)
    terms = -weight * (1.0 - p_true) ** gamma * np.log(np.maximum(p_true, LOG_CLAMP))
    return float(terms.mean())


def total_loss(probs: Probabilities, truth: np.ndarray, params: LossParams = LossParams()) -> float:
    """loss_g(GDL) plus focal loss, the objective a backbone would be trained on."""
    gdl = generalized_dice_loss(probs, truth)
    return loss_g(gdl, params.k) + focal_loss(probs, truth, params.gamma, params.alpha_focal)


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """
    Welch's unequal-variance t-test.

    Args:
        a (Sequence[float]): First sample, at least 2 values
        b (Sequence[float]): Second sample, at least 2 values

    Returns:
        Tuple[float, float]: (t statistic, two-sided p-value)

    Raises:
        DegenerateSampleError: If a sample is too small or both have zero variance
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DegenerateSampleError(f"Need at least 2 values per sample, got {a.size} and {b.size}")
    var_a = a.var(ddof=1) / a.size
    var_b = b.var(ddof=1) / b.size
    standard_error_sq = var_a + var_b
    if not standard_error_sq > 0:
        raise DegenerateSampleError("Both samples have zero variance")
    t = (a.mean() - b.mean()) / np.sqrt(standard_error_sq)
    df = standard_error_sq ** 2 / (var_a ** 2 / (a.size - 1) + var_b ** 2 / (b.size - 1))
    # Two-sided tail of Student's t through the regularized incomplete beta.
    p = betainc(df / 2.0, 0.5, df / (df + t * t))
    return float(t), float(min(p, 1.0))
