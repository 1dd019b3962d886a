"""Supervised baselines and the cross-validation comparison against crowd wisdom."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.spatial.distance import cdist

from .aggregators import AggregatorSpec, aggregate
from .core import (
    CrowdWisdomError,
    GroundTruth,
    ResponseMatrix,
    SingularMatrixError,
    SplitInfeasibleError,
    ValidationError,
)
from .metrics import evaluate_two_sided
from .numerics import solve_spd
from .rng import derive_seed, generator

TRAIN_FRACTIONS = (0.10, 0.20, 0.25, 0.40, 0.60, 0.80, 0.90)
KNN_NEIGHBORS = (5, 7, 10, 15, 25, 40, 60, 90)
CLASSIFIERS = ("ols", "logistic", "lda", "knn")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.25
    repeats: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValidationError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.repeats < 1:
            raise ValidationError("repeats must be at least 1")


def _largest_remainder(quotas: np.ndarray, total: int, sizes: np.ndarray) -> np.ndarray:
    counts = np.floor(quotas).astype(int)
    short = total - int(counts.sum())
    # ties on the remainder go to the larger class, then the lower label
    order = sorted(range(len(quotas)), key=lambda c: (-(quotas[c] - counts[c]), -sizes[c], c))
    for c in order[:short]:
        counts[c] += 1
    return counts


def stratified_shuffle_split(truth, spec: SplitSpec, repeat_index: int,
                             n_individuals: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Random class-stratified train/test partition.

    The train size is round(f n); per-class train counts come from
    largest-remainder rounding of f times each class size. The draw depends
    only on (spec.seed, repeat_index).
    """
    y = np.asarray(getattr(truth, "labels", truth)).astype(np.int64)
    n = len(y)
    classes = np.array([0, 1])
    sizes = np.array([(y == c).sum() for c in classes])
    total = int(math.floor(spec.train_fraction * n + 0.5))
    counts = _largest_remainder(spec.train_fraction * sizes, total, sizes)
    problems = []
    if (counts < 1).any():
        problems.append(f"training set would miss a class (per-class train counts {counts.tolist()})")
    if total >= n:
        problems.append("training set would leave no test questions")
    if n_individuals is not None and total <= n_individuals:
        problems.append(f"training set of {total} questions is not larger than {n_individuals} individuals")
    if problems:
        raise SplitInfeasibleError("; ".join(problems))

    rng = generator(derive_seed(spec.seed, repeat_index))
    train = []
    for c, m in zip(classes, counts):
        members = np.flatnonzero(y == c)
        train.append(rng.permutation(members)[:m])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.setdiff1d(np.arange(n), train_idx)
    return train_idx, test_idx


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    n_neighbors: Optional[int] = None

    def __post_init__(self):
        if self.name not in CLASSIFIERS:
            raise ValidationError(f"unknown classifier {self.name!r}; choose from {CLASSIFIERS}")
        if self.name == "knn" and (self.n_neighbors is None or self.n_neighbors < 1):
            raise ValidationError("knn needs n_neighbors >= 1")
        if self.name != "knn" and self.n_neighbors is not None:
            raise ValidationError(f"{self.name} takes no n_neighbors")

    @property
    def tag(self) -> str:
        return self.name if self.n_neighbors is None else f"{self.name}({self.n_neighbors})"

    @classmethod
    def parse(cls, text: str) -> "ClassifierSpec":
        text = text.strip()
        for sep in ("(", ":"):
            if sep in text:
                name, _, rest = text.partition(sep)
                return cls(name.strip(), int(rest.rstrip(")").strip()))
        return cls(text)


def default_classifiers(n_train: Optional[int] = None) -> list[ClassifierSpec]:
    specs = [ClassifierSpec(name) for name in ("ols", "logistic", "lda")]
    specs += [ClassifierSpec("knn", nn) for nn in KNN_NEIGHBORS if n_train is None or nn <= n_train]
    return specs


def _design(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((len(X), 1)), X])


def _ols(X, y, X_test):
    coef, *_ = np.linalg.lstsq(_design(X), y.astype(float), rcond=None)
    return _design(X_test) @ coef


def _logistic(X, y, X_test, max_iter=100, tol=1e-8, jitter=1e-8):
    A = _design(X)
    w = np.zeros(A.shape[1])
    eye = np.eye(A.shape[1])
    for _ in range(max_iter):
        p = expit(A @ w)
        grad = A.T @ (y - p)
        H = (A * (p * (1 - p))[:, None]).T @ A + jitter * eye
        try:
            step = solve_spd(H, grad)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"logistic: {exc}", exc.pivot) from None
        w_new = w + step
        if not np.isfinite(w_new).all():
            break
        w = w_new
        if np.abs(step).max() < tol * max(1.0, np.abs(w).max()):
            break
    return _design(X_test) @ w


def lda_direction(X, y, ridge=1e-6) -> np.ndarray:
    X0, X1 = X[y == 0], X[y == 1]
    mu0, mu1 = X0.mean(axis=0), X1.mean(axis=0)
    centered = np.vstack([X0 - mu0, X1 - mu1])
    S = centered.T @ centered / max(len(X) - 2, 1)
    k = S.shape[0]
    S = S + ridge * np.trace(S) / k * np.eye(k)
    try:
        return solve_spd(S, mu1 - mu0)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"lda: {exc}", exc.pivot) from None


def _lda(X, y, X_test):
    return X_test @ lda_direction(X, y)


def _knn(X, y, X_test, n_neighbors):
    if n_neighbors > len(X):
        raise ValidationError(f"knn({n_neighbors}) needs at least {n_neighbors} training questions")
    D = cdist(X_test, X)
    idx = np.argsort(D, axis=1, kind="stable")[:, :n_neighbors]
    return y[idx].mean(axis=1)


def fit_predict(classifier, X_train, y_train, X_test, knn_neighbors: Optional[int] = None) -> np.ndarray:
    """Train on (question x individual) features and score the test questions."""
    if isinstance(classifier, str):
        classifier = ClassifierSpec.parse(classifier) if knn_neighbors is None else ClassifierSpec(classifier, knn_neighbors)
    X_train = np.asarray(X_train, dtype=float)
    X_test = np.asarray(X_test, dtype=float)
    y = np.asarray(getattr(y_train, "labels", y_train)).astype(np.int64)
    n_train, k = X_train.shape
    if len(y) != n_train:
        raise ValidationError(f"{len(y)} labels for {n_train} training questions")
    if n_train <= k:
        raise ValidationError(f"need more training questions ({n_train}) than individuals ({k})")
    if len(np.unique(y)) < 2:
        raise ValidationError("training labels contain a single class")
    if classifier.name == "ols":
        return _ols(X_train, y, X_test)
    if classifier.name == "logistic":
        return _logistic(X_train, y, X_test)
    if classifier.name == "lda":
        return _lda(X_train, y, X_test)
    return _knn(X_train, y, X_test, classifier.n_neighbors)


CV_COLUMNS = ["repeat", "method", "family", "auroc", "aupr", "orientation_auroc", "orientation_aupr", "error"]


@dataclass
class CvResult:
    table: pd.DataFrame
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def medians(self) -> pd.DataFrame:
        ok = self.table[self.table["error"] == ""]
        return ok.groupby(["family", "method"], sort=False)[["auroc", "aupr"]].median()

    def best(self, family: str, metric: str) -> float:
        med = self.medians()
        if family not in med.index.get_level_values(0):
            return float("nan")
        return float(med.loc[family][metric].max())


def cv_compare(matrix: ResponseMatrix, truth: GroundTruth, crowd_methods: Sequence,
               classifiers: Sequence, spec: SplitSpec) -> CvResult:
    """Cross-validated comparison of crowd wisdom with supervised classifiers.

    Crowd wisdom is computed once on every question without labels and only
    restricted to the test questions afterwards; classifiers are refit per
    repeat. Both are scored with the two-sided metrics.
    """
    crowd = [m if isinstance(m, AggregatorSpec) else AggregatorSpec.parse(str(m)) for m in crowd_methods]
    clfs = [c if isinstance(c, ClassifierSpec) else ClassifierSpec.parse(str(c)) for c in classifiers]
    y = np.asarray(truth.labels)
    X = np.asarray(matrix.values, dtype=float).T

    crowd_scores = {}
    crowd_errors = {}
    for m in crowd:
        try:
            crowd_scores[m.tag] = np.asarray(aggregate(matrix, m).scores)
        except CrowdWisdomError as exc:
            crowd_errors[m.tag] = f"{type(exc).__name__}: {exc}"

    rows = []
    skipped = []
    for r in range(spec.repeats):
        try:
            train, test = stratified_shuffle_split(y, spec, r, n_individuals=matrix.k)
        except SplitInfeasibleError as exc:
            skipped.append((r, str(exc)))
            continue
        if len(np.unique(y[test])) < 2:
            skipped.append((r, "test set contains a single class"))
            continue
        for m in crowd:
            row = {"repeat": r, "method": m.tag, "family": "crowd", "error": crowd_errors.get(m.tag, "")}
            if m.tag in crowd_scores:
                row.update(_metrics(crowd_scores[m.tag][test], y[test]))
            rows.append(row)
        for c in clfs:
            row = {"repeat": r, "method": c.tag, "family": "supervised", "error": ""}
            try:
                scores = fit_predict(c, X[train], y[train], X[test])
                row.update(_metrics(scores, y[test]))
            except CrowdWisdomError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    table = pd.DataFrame(rows, columns=CV_COLUMNS)
    return CvResult(table, skipped)


def _metrics(scores, labels) -> dict:
    rep = evaluate_two_sided(scores, labels)
    return {"auroc": rep.auroc, "aupr": rep.aupr,
            "orientation_auroc": rep.orientation_auroc.value,
            "orientation_aupr": rep.orientation_aupr.value}
