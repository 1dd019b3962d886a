"""Acceptance criteria, each at its stated tolerance and time budget.

Every test records a one-line PASS/FAIL verdict that is printed in the
terminal summary, and then asserts it.
"""

import json
import time
import warnings

import numpy as np
import pytest

from crowdwisdom.aggregators import isomap_scores, mds_scores, pca_scores, default_grid
from crowdwisdom.cli import main
from crowdwisdom.metrics import auroc
from crowdwisdom.numerics import all_pairs_shortest_paths
from crowdwisdom.simulator import convergence_study, preset, replicate_study, simulate_dataset, summarize_tpr_difference
from crowdwisdom.supervised import SplitSpec, cv_compare, default_classifiers

from conftest import (
    ACCEPTANCE_RESULTS,
    floyd_warshall,
    mann_whitney_auc,
    normalized_random,
    random_connected_graph,
    spearman_oracle,
)

SUITE_START = time.perf_counter()


def record(number, ok, detail):
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _dist_up_to_sign(a, b):
    return min(np.abs(a - b).max(), np.abs(a + b).max())


def test_criterion_01_pca_matches_dense_eigen_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        m = normalized_random(rng, 8, 40)
        X = np.array(m.values)
        X -= X.mean(axis=1, keepdims=True)
        vals, vecs = np.linalg.eig(X @ X.T / (X.shape[1] - 1))
        oracle = X.T @ np.real(vecs[:, np.argmax(np.real(vals))])
        worst = max(worst, abs(1 - abs(spearman_oracle(pca_scores(m).scores, oracle))))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-8 and elapsed < 5,
           f"max |1 - |Spearman|| = {worst:.2e} over 100 matrices (tol 1e-8), {elapsed:.2f}s (< 5s)")


def test_criterion_02_auroc_matches_mann_whitney():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        s = rng.integers(0, 10, size=50).astype(float)
        y = rng.integers(0, 2, size=50)
        y[:2] = [0, 1]
        worst = max(worst, abs(auroc(s, y) - mann_whitney_auc(s, y)))
    elapsed = time.perf_counter() - t0
    record(2, worst <= 1e-12 and elapsed < 5,
           f"max |AUROC - U/(n1 n0)| = {worst:.2e} over 1000 tied cases (tol 1e-12), {elapsed:.2f}s (< 5s)")


def test_criterion_03_dijkstra_matches_floyd_warshall():
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(50):
        W = random_connected_graph(rng, 12, extra_edges=int(rng.integers(0, 20)))
        mismatches += not np.array_equal(all_pairs_shortest_paths(W), floyd_warshall(W))
    record(3, mismatches == 0, f"{mismatches}/50 graphs differ from Floyd-Warshall (exact comparison)")


def test_criterion_04_mds_pca_isomap_duality():
    rng = np.random.default_rng(4)
    worst_mds = worst_iso = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(100):
            k, n = int(rng.integers(3, 12)), int(rng.integers(15, 60))
            m = normalized_random(rng, k, n)
            mds = mds_scores(m).scores
            worst_mds = max(worst_mds, _dist_up_to_sign(mds, pca_scores(m).scores))
            worst_iso = max(worst_iso, _dist_up_to_sign(isomap_scores(m, n - 1).scores, mds))
    record(4, worst_mds <= 1e-8 and worst_iso <= 1e-8,
           f"max |MDS - PCA| = {worst_mds:.2e}, max |Isomap(complete) - MDS| = {worst_iso:.2e} (tol 1e-8)")


def test_criterion_05_tpr_difference_positive():
    t0 = time.perf_counter()
    table = replicate_study(preset("SIM-BASE"), 200, ["pca", "sml"])
    s = summarize_tpr_difference(table, "sml")
    elapsed = time.perf_counter() - t0
    record(5, s.mean > 0 and s.p_value < 0.01 and elapsed < 120,
           f"mean TPR difference {s.mean:.4f} over {s.n} replicates, one-sided p = {s.p_value:.2e} "
           f"(< 0.01), {elapsed:.1f}s (< 120s)")


def test_criterion_06_proportion_of_differences_shrinks_with_k():
    t0 = time.perf_counter()
    base = preset("SIM-BASE")
    med = {}
    for k in (8, 64):
        table = replicate_study(base.with_(k=k), 50, ["pca", "sml"], binarize=True)
        rows = table[(table["method"] == "sml") & ~table["excluded"]]
        med[k] = float(rows["prop_diff"].median())
    elapsed = time.perf_counter() - t0
    record(6, med[64] < med[8] and elapsed < 120,
           f"median proportion of differences k=64: {med[64]:.4f} < k=8: {med[8]:.4f}, {elapsed:.1f}s (< 120s)")


def test_criterion_07_spearman_converges_with_k():
    ks = [4, 8, 16, 32, 64]
    table = convergence_study(preset("SIM-BASE"), ks, 50, ["pca"])
    med = table.groupby("k")["spearman_abs"].median().reindex(ks).to_numpy()
    steps_ok = bool(np.all(np.diff(med) >= -0.02))
    shown = ", ".join(f"{k}:{v:.3f}" for k, v in zip(ks, med))
    record(7, steps_ok and med[-1] >= 0.9,
           f"median |Spearman| by k {{{shown}}}; nondecreasing within 0.02, >= 0.9 at k=64")


def test_criterion_08_pca_beats_mean_with_adversaries():
    table = replicate_study(preset("SIM-ADVERSARIAL"), 200, ["pca", "mean"])
    wide = table.pivot(index="replicate", columns="method", values="auroc")
    frac = float((wide["pca"] > wide["mean"]).mean())
    record(8, frac >= 0.8, f"PCA AUROC > mean AUROC in {frac:.1%} of 200 replicates (>= 80%)")


def test_criterion_09_crowd_matches_supervised_in_cv():
    ds = simulate_dataset(preset("SIM-BASE"))
    spec = SplitSpec(0.25, repeats=200, seed=0)
    n_train = int(np.floor(0.25 * ds.matrix.n + 0.5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = cv_compare(ds.matrix, ds.truth, default_grid(ds.matrix.n), default_classifiers(n_train), spec)
    rows_ok = (res.table.groupby("method").size() == 200).all()
    best = {(f, m): res.best(f, m) for f in ("crowd", "supervised") for m in ("auroc", "aupr")}
    ok = (rows_ok and best["crowd", "auroc"] >= best["supervised", "auroc"] - 0.01
          and best["crowd", "aupr"] >= best["supervised", "aupr"] - 0.01)
    record(9, ok,
           f"best median AUROC crowd {best['crowd', 'auroc']:.4f} vs supervised {best['supervised', 'auroc']:.4f}; "
           f"AUPR crowd {best['crowd', 'aupr']:.4f} vs supervised {best['supervised', 'aupr']:.4f} (margin 0.01)")


def test_criterion_10_manifests_rerun_bit_identically(tmp_path):
    d = tmp_path / "data"
    runs = [
        ["simulate", "--preset", "SIM-SMALL", "--seed", "3", "--out", str(d)],
        ["aggregate", "--in", str(d / "responses.csv"), "--method", "isomap", "--neighbors", "10",
         "--out", str(tmp_path / "scores.csv")],
        ["evaluate", "--scores", str(tmp_path / "scores.csv"), "--truth", str(d / "truth.csv"),
         "--out", str(tmp_path / "report.json")],
        ["study", "--compare", "binarization", "--preset", "SIM-SMALL", "--replicates", "4",
         "--out", str(tmp_path / "bin.csv")],
        ["study", "--compare", "convergence", "--preset", "SIM-SMALL", "--replicates", "2",
         "--methods", "pca,lle(10)", "--out", str(tmp_path / "conv.csv")],
        ["study", "--compare", "cv", "--preset", "SIM-SMALL", "--replicates", "5",
         "--out", str(tmp_path / "cv.csv")],
    ]
    manifests = [d / "manifest.json"] + [tmp_path / f"{name}.manifest.json" for name in
                                         ("scores.csv", "report.json", "bin.csv", "conv.csv", "cv.csv")]
    codes = [main(argv) for argv in runs]
    verified = [main(["verify", str(m)]) for m in manifests]
    complete = all(json.loads(m.read_text())["output_digests"] for m in manifests)
    elapsed = time.perf_counter() - SUITE_START
    ok = codes == [0] * 6 and verified == [0] * 6 and complete and elapsed < 600
    record(10, ok, f"{verified.count(0)}/6 commands re-ran bit-identically from their manifests; "
                   f"acceptance suite {elapsed:.1f}s (< 600s)")
