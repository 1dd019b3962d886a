"""Domain types shared across the package, plus structural validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class CrowdWisdomError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(CrowdWisdomError, ValueError):
    exit_code = 2


class InvalidKindError(ValidationError):
    pass


class DegenerateTruthError(ValidationError):
    pass


class SplitInfeasibleError(ValidationError):
    pass


class NumericalError(CrowdWisdomError, ArithmeticError):
    exit_code = 3


class DegenerateError(NumericalError):
    pass


class ConnectivityError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class SamplingBudgetError(NumericalError):
    pass


class AlignmentError(CrowdWisdomError):
    exit_code = 5


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Orientation(str, enum.Enum):
    AS_COMPUTED = "as_computed"
    FLIPPED = "flipped"

    def toggled(self) -> "Orientation":
        if self is Orientation.AS_COMPUTED:
            return Orientation.FLIPPED
        return Orientation.AS_COMPUTED


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """k individuals (rows) by n questions (columns).

    ``normalized`` marks matrices that went through the normalization
    protocol; a normalized binary matrix holds two standardized values per
    row instead of 0/1.
    """

    values: np.ndarray
    individual_ids: tuple[str, ...]
    question_ids: tuple[str, ...]
    kind: Kind = Kind.CONTINUOUS
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "individual_ids", tuple(str(i) for i in self.individual_ids))
        object.__setattr__(self, "question_ids", tuple(str(q) for q in self.question_ids))
        object.__setattr__(self, "kind", Kind(self.kind))

    @classmethod
    def from_array(cls, values, kind=None, individual_ids=None, question_ids=None) -> "ResponseMatrix":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"response matrix must be 2-D, got shape {values.shape}")
        k, n = values.shape
        if kind is None:
            finite = values[np.isfinite(values)]
            kind = Kind.BINARY if finite.size and np.isin(finite, (0.0, 1.0)).all() else Kind.CONTINUOUS
        if individual_ids is None:
            individual_ids = [f"ind{j}" for j in range(k)]
        if question_ids is None:
            question_ids = [f"q{i}" for i in range(n)]
        return cls(values, tuple(individual_ids), tuple(question_ids), Kind(kind))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def replace(self, values=None, kind=None, normalized=None) -> "ResponseMatrix":
        return ResponseMatrix(
            self.values if values is None else values,
            self.individual_ids,
            self.question_ids,
            self.kind if kind is None else kind,
            self.normalized if normalized is None else normalized,
        )

    def take_questions(self, idx) -> "ResponseMatrix":
        idx = np.asarray(idx, dtype=int)
        return ResponseMatrix(
            self.values[:, idx],
            self.individual_ids,
            tuple(self.question_ids[i] for i in idx),
            self.kind,
            self.normalized,
        )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen(self.labels, dtype=np.int64))

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class ClassProbabilities:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    orientation: Orientation = Orientation.AS_COMPUTED
    method_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen(self.scores))
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    def __len__(self):
        return len(self.scores)

    def negated(self) -> "ScoreVector":
        return ScoreVector(-self.scores, self.orientation.toggled(), self.method_tag)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    axis: Optional[str] = None
    index: Optional[tuple] = None

    def __str__(self):
        return self.message


def validate_dataset(
    matrix: ResponseMatrix,
    truth: Optional[GroundTruth] = None,
    probs: Optional[ClassProbabilities] = None,
    require_both_classes: bool = True,
) -> list[Violation]:
    """Return every violated structural invariant; an empty list means OK."""
    out: list[Violation] = []
    values = np.asarray(matrix.values)
    if values.ndim != 2:
        return [Violation("shape", f"response matrix must be 2-D, got shape {values.shape}")]
    k, n = values.shape

    bad = np.argwhere(~np.isfinite(values))
    for row, col in bad:
        out.append(Violation("non_finite", f"non-finite value at (row {row}, column {col})",
                             "cell", (int(row), int(col))))

    if matrix.kind is Kind.BINARY:
        if not matrix.normalized:
            off = np.argwhere(np.isfinite(values) & ~np.isin(values, (0.0, 1.0)))
            for row, col in off:
                out.append(Violation("not_binary", f"binary matrix has value {values[row, col]!r} "
                                     f"at (row {row}, column {col})", "cell", (int(row), int(col))))
        else:
            for row in range(k):
                if len(np.unique(values[row])) > 2:
                    out.append(Violation("not_binary", f"normalized binary row {row} has more than "
                                         "two distinct values", "row", (row,)))

    if k < 2:
        out.append(Violation("too_few_individuals", f"need at least 2 individuals, got {k}", "row"))
    if n < 3:
        out.append(Violation("too_few_questions", f"need at least 3 questions, got {n}", "column"))
    if len(matrix.individual_ids) != k:
        out.append(Violation("id_length", f"{len(matrix.individual_ids)} individual ids for {k} rows", "row"))
    if len(matrix.question_ids) != n:
        out.append(Violation("id_length", f"{len(matrix.question_ids)} question ids for {n} columns", "column"))
    out.extend(_duplicate_ids(matrix.individual_ids, "row"))
    out.extend(_duplicate_ids(matrix.question_ids, "column"))

    if truth is not None:
        labels = np.asarray(truth.labels)
        if len(labels) != n:
            out.append(Violation("length_mismatch", f"truth has {len(labels)} labels for {n} questions", "column"))
        off = np.flatnonzero(~np.isin(labels, (0, 1)))
        for i in off:
            out.append(Violation("label_value", f"label {labels[i]!r} at question {i} is not 0/1", "column", (int(i),)))
        if require_both_classes and len(labels) and len(np.unique(labels)) < 2:
            out.append(Violation("single_class", "single-class labels", "column"))

    if probs is not None:
        p = np.asarray(probs.probs)
        if len(p) != n:
            out.append(Violation("length_mismatch", f"{len(p)} class probabilities for {n} questions", "column"))
        off = np.flatnonzero(~((p >= 0) & (p <= 1)))
        for i in off:
            out.append(Violation("prob_range", f"class probability {p[i]!r} at question {i} outside [0, 1]",
                                 "column", (int(i),)))
    return out


def _duplicate_ids(ids: Sequence[str], axis: str) -> list[Violation]:
    seen: dict[str, int] = {}
    out = []
    for i, name in enumerate(ids):
        if name in seen:
            out.append(Violation("duplicate_id", f"duplicate id {name!r} at {axis} {i} "
                                 f"(first at {seen[name]})", axis, (i,)))
        else:
            seen[name] = i
    return out


def require_valid(matrix, truth=None, probs=None, require_both_classes=True) -> None:
    report = validate_dataset(matrix, truth, probs, require_both_classes)
    if report:
        raise ValidationError("; ".join(str(v) for v in report))


__all__ = [
    "AlignmentError", "ClassProbabilities", "ConnectivityError", "CrowdWisdomError",
    "DegenerateError", "DegenerateTruthError", "GroundTruth", "InvalidKindError", "Kind",
    "NumericalError", "Orientation", "ResponseMatrix", "SamplingBudgetError", "ScoreVector",
    "SingularMatrixError", "SplitInfeasibleError", "ValidationError", "Violation",
    "require_valid", "validate_dataset",
]
