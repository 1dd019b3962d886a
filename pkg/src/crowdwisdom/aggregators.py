"""Crowd-wisdom aggregators.

Every aggregator maps a normalized response matrix (individuals x questions)
to one consensus score per question. The questions are the points being
embedded; the individuals are the ambient coordinates.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    ConnectivityError,
    DegenerateError,
    InvalidKindError,
    Kind,
    NumericalError,
    Orientation,
    ResponseMatrix,
    ScoreVector,
    ValidationError,
)
from .numerics import (
    all_pairs_shortest_paths,
    double_center,
    solve_spd,
    sym_eig_bottom,
    sym_eig_top,
)

DEFAULT_NEIGHBORS = (5, 7, 10, 15, 25, 40, 60, 90)


class DegenerateTieWarning(UserWarning):
    """The selected eigenvalue is (numerically) repeated."""


class OrientationWarning(UserWarning):
    """Majority alignment could not decide a sign."""


class ConstantIndividualWarning(UserWarning):
    """An individual gave the same response to every question."""


class Method(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    PCA = "pca"
    FACTOR_ANALYSIS = "factor_analysis"
    MDS = "mds"
    ISOMAP = "isomap"
    LLE = "lle"
    SPECTRAL = "spectral"
    SML = "sml"


NEIGHBOR_METHODS = frozenset({Method.ISOMAP, Method.LLE, Method.SPECTRAL})


@dataclass(frozen=True)
class AggregatorSpec:
    method: Method
    n_neighbors: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method in NEIGHBOR_METHODS:
            if self.n_neighbors is None:
                raise ValidationError(f"{self.method.value} needs n_neighbors")
            low = 2 if self.method is Method.LLE else 1
            if int(self.n_neighbors) < low:
                raise ValidationError(f"{self.method.value} needs n_neighbors >= {low}")
            object.__setattr__(self, "n_neighbors", int(self.n_neighbors))
        elif self.n_neighbors is not None:
            raise ValidationError(f"{self.method.value} takes no n_neighbors")

    @property
    def tag(self) -> str:
        if self.n_neighbors is None:
            return self.method.value
        return f"{self.method.value}({self.n_neighbors})"

    @classmethod
    def parse(cls, text: str) -> "AggregatorSpec":
        """Parse ``pca``, ``isomap(10)`` or ``isomap:10``."""
        text = text.strip()
        for sep in ("(", ":"):
            if sep in text:
                name, _, rest = text.partition(sep)
                return cls(Method(name.strip()), int(rest.rstrip(")").strip()))
        return cls(Method(text))

    def check_against(self, n: int) -> None:
        if self.n_neighbors is not None and self.n_neighbors >= n:
            raise ValidationError(
                f"{self.tag}: n_neighbors must be smaller than the number of questions ({n})")


def default_grid(n: Optional[int] = None) -> list[AggregatorSpec]:
    """Every method, with each neighbor-based one at every default size below n."""
    specs = [AggregatorSpec(m) for m in (Method.MEAN, Method.MEDIAN, Method.PCA,
                                         Method.FACTOR_ANALYSIS, Method.MDS)]
    for m in (Method.ISOMAP, Method.LLE, Method.SPECTRAL):
        specs += [AggregatorSpec(m, nn) for nn in DEFAULT_NEIGHBORS if n is None or nn < n]
    return specs


def _points(matrix: ResponseMatrix) -> np.ndarray:
    """Questions as points: an n x k array."""
    return np.asarray(matrix.values, dtype=float).T


def _centered(matrix: ResponseMatrix) -> np.ndarray:
    X = np.asarray(matrix.values, dtype=float)
    return X - X.mean(axis=1, keepdims=True)


def _warn_if_tied(values: np.ndarray, i: int, j: int, what: str) -> None:
    scale = max(1.0, abs(values[i]), abs(values[j]))
    if abs(values[i] - values[j]) <= 1e-10 * scale:
        warnings.warn(f"{what}: eigenvalue {values[i]:.6g} is repeated; "
                      "the returned vector is one of several", DegenerateTieWarning, stacklevel=3)


# simple statistics


def mean_scores(matrix: ResponseMatrix) -> ScoreVector:
    return ScoreVector(np.asarray(matrix.values).mean(axis=0), method_tag="mean")


def median_scores(matrix: ResponseMatrix) -> ScoreVector:
    return ScoreVector(np.median(np.asarray(matrix.values), axis=0), method_tag="median")


# linear methods


def pca_scores(matrix: ResponseMatrix) -> ScoreVector:
    """Projection of every question onto the first principal direction.

    The right-singular direction of the n x k question-by-individual matrix is
    taken from the k x k Gram matrix, which is cheap since k is small.
    """
    X = _centered(matrix)
    if not np.abs(X).max(initial=0.0) > 0:
        raise DegenerateError("pca: response matrix is constant")
    gram = X @ X.T
    eig = sym_eig_top(gram, 1)
    return ScoreVector(X.T @ eig.eigenvectors[:, 0], method_tag="pca")


def mds_scores(matrix: ResponseMatrix) -> ScoreVector:
    """Classical (Torgerson) MDS on Euclidean distances between questions."""
    P = _points(matrix)
    D2 = cdist(P, P, "sqeuclidean")
    return ScoreVector(_embed_gram(double_center(D2), "mds"), method_tag="mds")


def _embed_gram(B: np.ndarray, what: str) -> np.ndarray:
    eig = sym_eig_top(B, 2 if B.shape[0] > 1 else 1)
    lam = eig.eigenvalues[0]
    if not lam > 0:
        raise DegenerateError(f"{what}: top eigenvalue {lam:.6g} is not positive")
    if len(eig.eigenvalues) > 1:
        _warn_if_tied(eig.eigenvalues, 0, 1, what)
    return eig.eigenvectors[:, 0] * np.sqrt(lam)


def factor_analysis_scores(matrix: ResponseMatrix, tol: float = 1e-6, max_iter: int = 1000) -> ScoreVector:
    fit = fit_one_factor(matrix, tol=tol, max_iter=max_iter)
    return ScoreVector(fit.scores, method_tag="factor_analysis")


@dataclass(frozen=True, eq=False)
class FactorFit:
    loadings: np.ndarray
    uniquenesses: np.ndarray
    scores: np.ndarray
    loglik: float
    n_iter: int


def _fa_loglik(S: np.ndarray, lam: np.ndarray, psi: np.ndarray, n: int) -> float:
    k = len(lam)
    sigma = np.outer(lam, lam) + np.diag(psi)
    _, logdet = np.linalg.slogdet(sigma)
    return -0.5 * n * (k * np.log(2 * np.pi) + logdet + np.trace(np.linalg.solve(sigma, S)))


def fit_one_factor(matrix: ResponseMatrix, tol: float = 1e-6, max_iter: int = 1000) -> FactorFit:
    """Single-factor model r_j = lambda_j z + eps_j fit by EM.

    Factor scores are posterior means E[z | r] (regression method).
    """
    X = _centered(matrix)
    k, n = X.shape
    if k < 3:
        raise ValidationError(f"factor analysis needs at least 3 individuals, got {k}")
    S = X @ X.T / n
    diag = np.diag(S).copy()
    if not diag.max(initial=0.0) > 0:
        raise DegenerateError("factor_analysis: response matrix is constant")
    floor = 1e-6 * max(diag.max(), 1e-12)

    top = sym_eig_top(S, 1)
    lam = top.eigenvectors[:, 0] * np.sqrt(max(top.eigenvalues[0], 0.0))
    psi = np.maximum(diag - lam ** 2, np.maximum(0.1 * diag, floor))

    ll = _fa_loglik(S, lam, psi, n)
    it = 0
    for it in range(1, max_iter + 1):
        sigma = np.outer(lam, lam) + np.diag(psi)
        beta = np.linalg.solve(sigma, lam)  # E[z|x] = beta @ x
        Sb = S @ beta
        ezz = 1.0 - beta @ lam + beta @ Sb  # average E[z^2|x]
        lam = Sb / ezz
        psi = np.maximum(diag - lam * Sb, floor)
        new_ll = _fa_loglik(S, lam, psi, n)
        if new_ll < ll - 1e-8 * max(1.0, abs(ll)):
            raise NumericalError(f"factor_analysis: EM log-likelihood decreased "
                                 f"from {ll:.12g} to {new_ll:.12g} at iteration {it}")
        done = new_ll - ll < tol
        ll = new_ll
        if done:
            break

    sigma = np.outer(lam, lam) + np.diag(psi)
    beta = np.linalg.solve(sigma, lam)
    return FactorFit(lam, psi, beta @ X, float(ll), it)


# neighbor-graph methods


def knn_indices(points: np.ndarray, n_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of each point's nearest neighbors (self excluded).

    Distance ties go to the lower index.
    """
    n = len(points)
    if not 1 <= n_neighbors < n:
        raise ValidationError(f"n_neighbors must be in [1, {n - 1}], got {n_neighbors}")
    D = cdist(points, points)
    np.fill_diagonal(D, np.inf)
    idx = np.argsort(D, axis=1, kind="stable")[:, :n_neighbors]
    return idx, D


def _knn_union(points: np.ndarray, n_neighbors: int, what: str):
    idx, D = knn_indices(points, n_neighbors)
    n = len(points)
    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), n_neighbors), idx.ravel()] = True
    adj |= adj.T
    _require_connected(adj, what, n_neighbors)
    np.fill_diagonal(D, 0.0)
    return adj, D


def _require_connected(adj: np.ndarray, what: str, n_neighbors: int) -> None:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n_comp, labels = connected_components(csr_matrix(adj), directed=False)
    if n_comp > 1:
        sizes = sorted(np.bincount(labels).tolist(), reverse=True)
        raise ConnectivityError(
            f"{what}: neighbor graph with n_neighbors={n_neighbors} is disconnected "
            f"(component sizes {sizes}); use a larger n_neighbors")


def isomap_scores(matrix: ResponseMatrix, n_neighbors: int) -> ScoreVector:
    P = _points(matrix)
    adj, D = _knn_union(P, n_neighbors, "isomap")
    W = np.where(adj, D, np.inf)
    G = all_pairs_shortest_paths(W)
    scores = _embed_gram(double_center(G ** 2), "isomap")
    return ScoreVector(scores, method_tag=f"isomap({n_neighbors})")


def lle_weights(points: np.ndarray, n_neighbors: int, reg: float = 1e-3) -> np.ndarray:
    """Row-stochastic reconstruction weights W (n x n) of standard LLE."""
    n = len(points)
    idx, _ = knn_indices(points, n_neighbors)
    W = np.zeros((n, n))
    ones = np.ones(n_neighbors)
    for i in range(n):
        Z = points[idx[i]] - points[i]
        C = Z @ Z.T
        tr = np.trace(C)
        ridge = reg * tr / n_neighbors if tr > 0 else reg
        C.flat[:: n_neighbors + 1] += ridge
        w = solve_spd(C, ones)
        W[i, idx[i]] = w / w.sum()
    return W


def lle_scores(matrix: ResponseMatrix, n_neighbors: int) -> ScoreVector:
    if n_neighbors < 2:
        raise ValidationError("lle needs n_neighbors >= 2")
    P = _points(matrix)
    _knn_union(P, n_neighbors, "lle")
    W = lle_weights(P, n_neighbors)
    IW = np.eye(len(P)) - W
    M = IW.T @ IW
    eig = sym_eig_bottom(M, min(3, len(P)))
    if len(eig.eigenvalues) > 2:
        _warn_if_tied(eig.eigenvalues, 1, 2, "lle")
    return ScoreVector(eig.eigenvectors[:, 1], method_tag=f"lle({n_neighbors})")


def spectral_scores(matrix: ResponseMatrix, n_neighbors: int) -> ScoreVector:
    """Fiedler vector of the normalized Laplacian of the binary kNN graph."""
    P = _points(matrix)
    adj, _ = _knn_union(P, n_neighbors, "spectral")
    return ScoreVector(_fiedler(adj.astype(float)), method_tag=f"spectral({n_neighbors})")


def normalized_laplacian(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    deg = A.sum(axis=1)
    if (deg <= 0).any():
        raise ConnectivityError("graph has isolated vertices")
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = np.eye(len(A)) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    return 0.5 * (L + L.T), deg


def _fiedler(A: np.ndarray) -> np.ndarray:
    L, deg = normalized_laplacian(A)
    eig = sym_eig_bottom(L, min(3, len(L)))
    if len(eig.eigenvalues) > 2:
        _warn_if_tied(eig.eigenvalues, 1, 2, "spectral")
    return eig.eigenvectors[:, 1] / np.sqrt(deg)


# binary crowd wisdom


@dataclass(frozen=True, eq=False)
class SmlFit:
    weights: np.ndarray
    scores: np.ndarray
    n_iter: int


def to_signs(matrix: ResponseMatrix) -> np.ndarray:
    """Map each row's upper value to +1 and lower value to -1 (constant rows: 0)."""
    X = np.asarray(matrix.values, dtype=float)
    hi = X.max(axis=1, keepdims=True)
    lo = X.min(axis=1, keepdims=True)
    F = np.where(X == hi, 1.0, -1.0)
    F[(hi == lo).ravel()] = 0.0
    return F


def fit_sml(matrix: ResponseMatrix, max_iter: int = 100, tol: float = 1e-10) -> SmlFit:
    """Spectral meta-learner weights for conditionally independent binary raters.

    The off-diagonal part of the raters' covariance is rank one; its leading
    eigenvector, found by repeatedly re-imputing the diagonal from the current
    rank-one fit, weights every rater.
    """
    if matrix.kind is not Kind.BINARY:
        raise InvalidKindError("sml accepts binary responses only")
    F = to_signs(matrix)
    k, n = F.shape
    active = np.flatnonzero(np.any(F != 0, axis=1))
    for j in np.setdiff1d(np.arange(k), active):
        warnings.warn(f"sml: individual {matrix.individual_ids[j]!r} is constant; weight set to 0",
                      ConstantIndividualWarning, stacklevel=2)
    weights = np.zeros(k)
    if len(active) < 2:
        raise DegenerateError("sml: fewer than two non-constant individuals")
    Fa = F[active]
    Fc = Fa - Fa.mean(axis=1, keepdims=True)
    Q = Fc @ Fc.T / (n - 1)

    eig = sym_eig_top(Q, 1)
    v, lam = eig.eigenvectors[:, 0], eig.eigenvalues[0]
    R = Q.copy()
    it = 0
    for it in range(1, max_iter + 1):
        np.fill_diagonal(R, lam * v ** 2)
        eig = sym_eig_top(R, 1)
        v_new, lam = eig.eigenvectors[:, 0], eig.eigenvalues[0]
        step = np.linalg.norm(v_new - v)
        v = v_new
        if step < tol:
            break
    weights[active] = v
    return SmlFit(weights, weights @ F, it)


def sml_scores(matrix: ResponseMatrix) -> ScoreVector:
    return ScoreVector(fit_sml(matrix).scores, method_tag="sml")


def sml_predictions(scores: ScoreVector) -> np.ndarray:
    """Binary SML output: yes where the weighted vote is positive."""
    return (np.asarray(scores.scores) > 0).astype(np.int64)


# orientation and thresholding


def align_to_majority(scores: ScoreVector, matrix: ResponseMatrix) -> ScoreVector:
    """Negate scores that anti-correlate with the per-question mean response."""
    s = np.asarray(scores.scores, dtype=float)
    ref = np.asarray(matrix.values, dtype=float).mean(axis=0)
    if len(s) != len(ref):
        raise ValidationError(f"{len(s)} scores for {len(ref)} questions")
    sc = s - s.mean()
    rc = ref - ref.mean()
    if not (np.abs(sc).max(initial=0.0) > 0 and np.abs(rc).max(initial=0.0) > 0):
        warnings.warn("align_to_majority: zero-variance input, orientation unchanged",
                      OrientationWarning, stacklevel=2)
        return scores
    corr = (sc @ rc) / (np.linalg.norm(sc) * np.linalg.norm(rc))
    if corr < 0:
        return scores.negated()
    return scores


def threshold_scores(scores, n_positive: int) -> np.ndarray:
    """Mark the n_positive largest scores as 1; ties go to the lower index."""
    s = np.asarray(getattr(scores, "scores", scores), dtype=float)
    n = len(s)
    if not 0 <= n_positive <= n:
        raise ValidationError(f"n_positive must be in [0, {n}], got {n_positive}")
    order = np.lexsort((np.arange(n), -s))
    out = np.zeros(n, dtype=np.int64)
    out[order[:n_positive]] = 1
    return out


_DISPATCH = {
    Method.MEAN: mean_scores,
    Method.MEDIAN: median_scores,
    Method.PCA: pca_scores,
    Method.FACTOR_ANALYSIS: factor_analysis_scores,
    Method.MDS: mds_scores,
    Method.SML: sml_scores,
    Method.ISOMAP: isomap_scores,
    Method.LLE: lle_scores,
    Method.SPECTRAL: spectral_scores,
}


def aggregate(matrix: ResponseMatrix, spec: AggregatorSpec) -> ScoreVector:
    """Run one aggregator and orient its output with the majority of the crowd."""
    if isinstance(spec, str):
        spec = AggregatorSpec.parse(spec)
    spec.check_against(matrix.n)
    if spec.method is Method.SML and matrix.kind is not Kind.BINARY:
        raise InvalidKindError("sml accepts binary responses only")
    fn = _DISPATCH[spec.method]
    if spec.method in NEIGHBOR_METHODS:
        raw = fn(matrix, spec.n_neighbors)
    else:
        raw = fn(matrix)
    if not np.isfinite(raw.scores).all():
        raise NumericalError(f"{spec.tag}: non-finite scores")
    raw = ScoreVector(raw.scores, Orientation.AS_COMPUTED, spec.tag)
    return align_to_majority(raw, matrix)
