"""Deterministic dense kernels: symmetric eigenproblems, SPD solves, geodesics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.sparse import csgraph

from .core import ConnectivityError, SingularMatrixError, ValidationError

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


def _check_symmetric(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValidationError("matrix contains non-finite entries")
    scale = max(np.abs(A).max(), 1e-300)
    if np.abs(A - A.T).max() > SYMMETRY_RTOL * scale:
        raise ValidationError("matrix is not symmetric")
    return A


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _eig(A, m: int, top: bool) -> EigenResult:
    A = _check_symmetric(A)
    d = A.shape[0]
    if not 1 <= m <= d:
        raise ValidationError(f"requested {m} eigenpairs of a {d}x{d} matrix")
    # symmetrize exactly so LAPACK sees the same matrix regardless of triangle
    w, v = np.linalg.eigh(0.5 * (A + A.T))
    sel = np.arange(d - 1, d - 1 - m, -1) if top else np.arange(m)
    return EigenResult(w[sel].copy(), _fix_signs(v[:, sel].copy()))


def sym_eig_top(A, m: int) -> EigenResult:
    """Largest m eigenpairs of a symmetric matrix, eigenvalues descending."""
    return _eig(A, m, top=True)


def sym_eig_bottom(A, m: int) -> EigenResult:
    """Smallest m eigenpairs of a symmetric matrix, eigenvalues ascending."""
    return _eig(A, m, top=False)


def solve_spd(A, b) -> np.ndarray:
    """Solve A x = b through a Cholesky factorization.

    Raises SingularMatrixError with the (0-based) failing pivot when A is not
    positive definite.
    """
    A = _check_symmetric(A)
    b = np.asarray(b, dtype=float)
    c, info = lapack.dpotrf(A, lower=True, clean=True, overwrite_a=False)
    if info > 0:
        raise SingularMatrixError(f"non-positive pivot at index {info - 1}", pivot=info - 1)
    if info < 0:
        raise ValidationError(f"invalid argument {-info} to Cholesky factorization")
    x, info = lapack.dpotrs(c, b, lower=True)
    if info != 0:
        raise SingularMatrixError(f"triangular solve failed (info={info})")
    return x


def _component_sizes(graph) -> list[int]:
    _, labels = csgraph.connected_components(graph, directed=False)
    return sorted(np.bincount(labels).tolist(), reverse=True)


def to_graph(weights):
    """Dense weight matrix (np.inf = no edge, diagonal ignored) to a csgraph."""
    if hasattr(weights, "tocsr"):
        return weights.tocsr()
    W = np.array(weights, dtype=float)
    np.fill_diagonal(W, np.inf)
    return csgraph.csgraph_from_dense(W, null_value=np.inf)


def all_pairs_shortest_paths(weights) -> np.ndarray:
    """Exact geodesic distances by Dijkstra from every source.

    ``weights`` is either a dense symmetric matrix with ``np.inf`` marking
    absent edges or a scipy sparse matrix whose stored entries are the edges.
    """
    graph = to_graph(weights)
    if graph.shape[0] != graph.shape[1]:
        raise ValidationError("edge set must be square")
    if graph.nnz and graph.data.min() < 0:
        raise ValidationError("edge weights must be nonnegative")
    D = csgraph.dijkstra(graph, directed=False)
    if not np.isfinite(D).all():
        sizes = _component_sizes(graph)
        raise ConnectivityError(f"graph is disconnected: component sizes {sizes}")
    np.fill_diagonal(D, 0.0)
    # undirected shortest paths are symmetric; remove any rounding asymmetry
    return np.minimum(D, D.T)


def double_center(D2) -> np.ndarray:
    """Gram matrix B = -1/2 J D2 J with J the centering projector."""
    D2 = _check_symmetric(D2)
    if (D2 < 0).any():
        raise ValidationError("squared distances must be nonnegative")
    if np.abs(np.diag(D2)).max(initial=0.0) > 0:
        raise ValidationError("squared distances need a zero diagonal")
    B = D2 - D2.mean(axis=0, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    B = -0.5 * B
    return 0.5 * (B + B.T)
