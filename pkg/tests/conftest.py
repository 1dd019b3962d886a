import numpy as np
import pytest

from crowdwisdom.core import ResponseMatrix
from crowdwisdom.preprocess import normalize


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def normalized_random(rng, k, n):
    matrix, _ = normalize(ResponseMatrix.from_array(rng.normal(size=(k, n))))
    return matrix


def floyd_warshall(W):
    """O(n^3) all-pairs shortest paths; W uses np.inf for missing edges."""
    D = np.array(W, dtype=float)
    n = len(D)
    np.fill_diagonal(D, 0.0)
    for m in range(n):
        for i in range(n):
            for j in range(n):
                if D[i, m] + D[m, j] < D[i, j]:
                    D[i, j] = D[i, m] + D[m, j]
    return D


def random_connected_graph(rng, n, extra_edges=10, integer=True):
    """Random spanning tree plus extra edges; symmetric, np.inf for no edge."""
    W = np.full((n, n), np.inf)
    order = rng.permutation(n)
    for a in range(1, n):
        b = order[rng.integers(0, a)]
        w = float(rng.integers(1, 10)) if integer else rng.uniform(0.1, 5)
        W[order[a], b] = W[b, order[a]] = w
    for _ in range(extra_edges):
        i, j = rng.choice(n, 2, replace=False)
        w = float(rng.integers(1, 10)) if integer else rng.uniform(0.1, 5)
        W[i, j] = W[j, i] = w
    return W


def mann_whitney_auc(scores, labels):
    """Pairwise O(n^2) AUROC with ties counted as one half."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    twice_u = 0
    for p in pos:
        for q in neg:
            twice_u += 2 if p > q else (1 if p == q else 0)
    return twice_u / (2 * len(pos) * len(neg))


def spearman_oracle(a, b):
    """Pearson correlation of tie-averaged ranks, ranks computed by hand."""
    def ranks(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(len(x))
        for i, v in enumerate(x):
            out[i] = (x < v).sum() + ((x == v).sum() + 1) / 2
        return out
    ra, rb = ranks(a), ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    return float(ra @ rb / np.sqrt((ra @ ra) * (rb @ rb)))


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
