"""Per-individual normalization and truth-count-aware binarization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .rng import generator
from .core import DegenerateTruthError, GroundTruth, InvalidKindError, Kind, ResponseMatrix, ValidationError


@dataclass(frozen=True)
class NormalizationSpec:
    rank_convert: bool = True
    center_scale: bool = True

    @classmethod
    def for_kind(cls, kind: Kind) -> "NormalizationSpec":
        return cls(rank_convert=Kind(kind) is Kind.CONTINUOUS)


def rank_transform(matrix: ResponseMatrix) -> ResponseMatrix:
    """Replace each row by its ranks 1..n, averaging ties."""
    if matrix.kind is not Kind.CONTINUOUS:
        raise InvalidKindError("rank conversion applies to continuous responses only")
    ranks = rankdata(matrix.values, method="average", axis=1)
    return matrix.replace(values=ranks)


def standardize(matrix: ResponseMatrix) -> tuple[ResponseMatrix, list[int]]:
    """Shift each row to mean 0 and scale to unit population variance.

    Returns the new matrix and the indices of constant rows, which are set to
    zero rather than scaled.
    """
    values = np.array(matrix.values, dtype=float)
    mean = values.mean(axis=1, keepdims=True)
    centered = values - mean
    sd = np.sqrt((centered ** 2).mean(axis=1))
    # a row is constant if its spread is negligible next to its magnitude
    scale = np.maximum(np.abs(values).max(axis=1), 1.0)
    constant = sd <= 1e-13 * scale
    out = np.zeros_like(values)
    ok = ~constant
    out[ok] = centered[ok] / sd[ok, None]
    # second pass removes the residual mean left by rounding
    out[ok] -= out[ok].mean(axis=1, keepdims=True)
    return matrix.replace(values=out), [int(j) for j in np.flatnonzero(constant)]


def normalize(matrix: ResponseMatrix, spec: NormalizationSpec | None = None) -> tuple[ResponseMatrix, list[int]]:
    """Apply the full protocol: ranks for continuous data, then z-scores."""
    if spec is None:
        spec = NormalizationSpec.for_kind(matrix.kind)
    if spec.rank_convert and matrix.kind is not Kind.CONTINUOUS:
        raise InvalidKindError("rank conversion requested for a binary matrix")
    if spec.rank_convert:
        matrix = rank_transform(matrix)
    constant: list[int] = []
    if spec.center_scale:
        matrix, constant = standardize(matrix)
    return matrix.replace(normalized=True), constant


def perfect_binarize(matrix: ResponseMatrix, truth: GroundTruth, seed: int) -> ResponseMatrix:
    """Each individual answers yes on exactly as many questions as truly are yes.

    The m = truth.n_positive highest responses of every row become 1. When the
    boundary value is tied, the remaining slots go to a uniformly drawn subset
    of the tied questions (seeded, rows processed in order).
    """
    values = np.asarray(matrix.values)
    k, n = values.shape
    if len(truth) != n:
        raise ValidationError(f"truth has {len(truth)} labels for {n} questions")
    m = truth.n_positive
    if m <= 0 or m >= n:
        raise DegenerateTruthError(f"binarization needs 0 < positives < n, got {m} of {n}")
    rng = generator(seed)
    out = np.zeros((k, n))
    for j in range(k):
        row = values[j]
        cut = np.sort(row)[::-1][m - 1]
        above = row > cut
        out[j, above] = 1.0
        need = m - int(above.sum())
        tied = np.flatnonzero(row == cut)
        if need == len(tied):
            out[j, tied] = 1.0
        else:
            out[j, rng.choice(tied, size=need, replace=False)] = 1.0
    return ResponseMatrix(out, matrix.individual_ids, matrix.question_ids, Kind.BINARY, False)
