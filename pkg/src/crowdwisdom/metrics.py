"""ROC / precision-recall evaluation with sign-indeterminate scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .core import Orientation, ValidationError
from .aggregators import threshold_scores


class ClassPresenceError(ValidationError):
    pass


def _scores(x) -> np.ndarray:
    return np.asarray(getattr(x, "scores", getattr(x, "probs", x)), dtype=float)


def _labels(y) -> np.ndarray:
    return np.asarray(getattr(y, "labels", y)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Vertices at every distinct score; thresholds[0] is +inf for (0, 0)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass(frozen=True, eq=False)
class PrCurve:
    precision: np.ndarray
    recall: np.ndarray
    thresholds: np.ndarray
    aupr: float


@dataclass(frozen=True)
class MetricReport:
    auroc: float
    aupr: float
    orientation_auroc: Orientation
    orientation_aupr: Orientation
    method_tag: str = ""

    @property
    def orientation_used(self) -> dict[str, Orientation]:
        return {"auroc": self.orientation_auroc, "aupr": self.orientation_aupr}


def _cumulative_counts(scores, truth):
    """True/false positive counts at each distinct threshold, descending."""
    s = _scores(scores)
    y = _labels(truth)
    if len(s) != len(y):
        raise ValidationError(f"{len(s)} scores for {len(y)} labels")
    if not np.isfinite(s).all():
        raise ValidationError("scores must be finite")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(1 - y)[last]
    return s[last], tp, fp, int(y.sum()), int(len(y) - y.sum())


def roc_curve(scores, truth) -> RocCurve:
    thr, tp, fp, n_pos, n_neg = _cumulative_counts(scores, truth)
    if n_pos == 0 or n_neg == 0:
        raise ClassPresenceError("ROC needs both classes in the truth labels")
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    # exact trapezoid in integers: sum dFP * (TP_i + TP_{i-1}) / (2 n_pos n_neg)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(fp / n_neg, tp / n_pos, np.r_[np.inf, thr], auc)


def pr_curve(scores, truth) -> PrCurve:
    """Precision-recall vertices and average precision sum_t (R_t - R_t-1) P_t."""
    thr, tp, fp, n_pos, _ = _cumulative_counts(scores, truth)
    if n_pos == 0:
        raise ClassPresenceError("precision-recall needs at least one positive label")
    precision = tp / (tp + fp)
    recall = tp / n_pos
    gained = np.diff(np.r_[0, tp])
    aupr = float(np.sum(gained * precision) / n_pos)
    return PrCurve(np.r_[1.0, precision], np.r_[0.0, recall], np.r_[np.inf, thr], aupr)


def auroc(scores, truth) -> float:
    return roc_curve(scores, truth).auc


def aupr(scores, truth) -> float:
    return pr_curve(scores, truth).aupr


def evaluate_two_sided(scores, truth, method_tag: Optional[str] = None) -> MetricReport:
    """Score both s and -s; keep the larger area, per metric.

    An exact tie keeps the as-computed orientation.
    """
    s = _scores(scores)
    tag = method_tag if method_tag is not None else getattr(scores, "method_tag", "")
    roc_up, roc_down = auroc(s, truth), auroc(-s, truth)
    pr_up, pr_down = aupr(s, truth), aupr(-s, truth)
    return MetricReport(
        auroc=max(roc_up, roc_down),
        aupr=max(pr_up, pr_down),
        orientation_auroc=Orientation.FLIPPED if roc_down > roc_up else Orientation.AS_COMPUTED,
        orientation_aupr=Orientation.FLIPPED if pr_down > pr_up else Orientation.AS_COMPUTED,
        method_tag=tag or "",
    )


class UndefinedCorrelationError(ValidationError):
    pass


def spearman_abs(scores, reference) -> float:
    a = _scores(scores)
    b = _scores(reference)
    if len(a) != len(b):
        raise ValidationError(f"length mismatch: {len(a)} vs {len(b)}")
    ra = rankdata(a) - (len(a) + 1) / 2
    rb = rankdata(b) - (len(b) + 1) / 2
    saa, sbb = ra @ ra, rb @ rb
    if saa == 0 or sbb == 0:
        raise UndefinedCorrelationError("Spearman correlation is undefined for a constant input")
    # sqrt of a product of equal squares is exact, so identical rankings give exactly 1
    return float(min(1.0, abs(ra @ rb) / np.sqrt(saa * sbb)))


def interpolate_tpr(curve: RocCurve, fpr: float) -> float:
    """TPR of a ROC curve at a given FPR.

    On a vertical segment (several vertices sharing this FPR) the top vertex
    is used, i.e. the best TPR reachable without exceeding the FPR; between
    FPR values the curve is linear.
    """
    if not 0.0 <= fpr <= 1.0:
        raise ValidationError(f"fpr must be in [0, 1], got {fpr}")
    x = curve.fpr
    i = int(np.searchsorted(x, fpr, side="right")) - 1
    if x[i] == fpr or i == len(x) - 1:
        return float(curve.tpr[i])
    x0, x1 = x[i], x[i + 1]
    y0, y1 = curve.tpr[i], curve.tpr[i + 1]
    return float(y0 + (y1 - y0) * (fpr - x0) / (x1 - x0))


def tpr_difference_at_fpr(pca_curve: RocCurve, other_point: tuple[float, float]) -> float:
    fpr, tpr = other_point
    return interpolate_tpr(pca_curve, fpr) - float(tpr)


def roc_point(predictions, truth) -> tuple[float, float]:
    """(FPR, TPR) of a binary prediction vector."""
    p = np.asarray(predictions).astype(np.int64)
    y = _labels(truth)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ClassPresenceError("ROC point needs both classes in the truth labels")
    return float(np.sum(p * (1 - y)) / n_neg), float(np.sum(p * y) / n_pos)


def proportion_of_differences(binary_cw, scores, matrix=None) -> Optional[float]:
    """Fraction of questions where thresholded scores disagree with a binary crowd wisdom.

    The scores are first oriented so their AUROC against the binary output
    (used as pseudo-labels) is at least 0.5, then the top N become positive,
    N being the binary output's positive count. Returns None when the binary
    output is single-valued, which marks the replicate as excluded.
    """
    b = _labels(binary_cw)
    s = _scores(scores)
    if len(b) != len(s):
        raise ValidationError(f"{len(b)} binary answers for {len(s)} scores")
    if matrix is not None and matrix.n != len(s):
        raise ValidationError(f"{len(s)} scores for a matrix with {matrix.n} questions")
    if len(np.unique(b)) < 2:
        return None
    if auroc(s, b) < 0.5:
        s = -s
    thresholded = threshold_scores(s, int(b.sum()))
    return float(np.sum(thresholded != b) / len(b))
