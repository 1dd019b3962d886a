import warnings

import numpy as np
import pytest

from crowdwisdom.aggregators import AggregatorSpec, aggregate
from crowdwisdom.core import SamplingBudgetError, ValidationError
from crowdwisdom.metrics import evaluate_two_sided, spearman_abs
from crowdwisdom.rng import derive_seed, splitmix64
from crowdwisdom.simulator import (
    PRESETS,
    STUDY_COLUMNS,
    SimulationParams,
    convergence_study,
    preset,
    replicate_study,
    simulate_dataset,
    summarize_tpr_difference,
)

SMALL = SimulationParams(k=6, n=120, p_yes=0.3, beta=1.0, alpha_bar=1.5, sigma_alpha=0.5, seed=11)


def test_splitmix_reference_values():
    # reference SplitMix64 stream from state 0: output i mixes state (i + 1) * golden
    expected = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert [splitmix64(i * 0x9E3779B97F4A7C15 % 2 ** 64) for i in range(3)] == expected
    assert derive_seed(0, 0) != derive_seed(0, 1)
    assert derive_seed(7, 3) == splitmix64(7 ^ splitmix64(3))


def test_params_validation():
    with pytest.raises(ValidationError):
        SimulationParams(k=1, n=100, p_yes=0.3, beta=1, alpha_bar=1, sigma_alpha=0)
    with pytest.raises(ValidationError):
        SimulationParams(k=5, n=10, p_yes=0.01, beta=1, alpha_bar=1, sigma_alpha=0)
    with pytest.raises(ValidationError):
        SimulationParams(k=5, n=10, p_yes=0.5, beta=0, alpha_bar=1, sigma_alpha=0)
    with pytest.raises(ValidationError):
        preset("SIM-NOPE")


def test_presets():
    assert set(PRESETS) == {"SIM-BASE", "SIM-HARD", "SIM-ADVERSARIAL", "SIM-SMALL", "SIM-LARGE-K"}
    assert preset("SIM-HARD").beta == 3.0
    assert preset("SIM-SMALL").n == 100
    assert preset("SIM-LARGE-K").k == 64
    assert preset("sim-base", seed=5).seed == 5


def test_same_seed_is_bitwise_identical():
    a, b = simulate_dataset(SMALL), simulate_dataset(SMALL)
    for x, y in [(a.matrix.values, b.matrix.values), (a.raw_matrix.values, b.raw_matrix.values),
                 (a.truth.labels, b.truth.labels), (a.probs.probs, b.probs.probs), (a.alphas, b.alphas)]:
        assert x.tobytes() == y.tobytes()
    c = simulate_dataset(SMALL.with_(seed=12))
    assert c.raw_matrix.values.tobytes() != a.raw_matrix.values.tobytes()


@pytest.mark.parametrize("seed", range(10))
def test_exact_class_count(seed):
    params = SMALL.with_(n=97, p_yes=0.37, seed=seed)
    ds = simulate_dataset(params)
    assert ds.truth.labels.sum() == int(np.floor(97 * 0.37 + 0.5)) == 36
    assert ds.matrix.normalized and not ds.raw_matrix.normalized
    assert ((ds.probs.probs >= 0) & (ds.probs.probs <= 1)).all()
    assert np.isfinite(ds.alphas).all() and ds.alphas.shape == (params.k,)


def test_zero_spread_gives_equal_alphas():
    ds = simulate_dataset(SMALL.with_(alpha_bar=0.0, sigma_alpha=0.0))
    assert (ds.alphas == 0).all()


def test_sampling_budget(monkeypatch):
    # a symmetric Beta always fills both quotas, so force class probabilities of zero
    import crowdwisdom.simulator as sim

    monkeypatch.setattr(sim, "beta_symmetric", lambda rng, shape, size: np.zeros(size))
    params = SimulationParams(k=3, n=20, p_yes=0.5, beta=1, alpha_bar=1, sigma_alpha=0)
    with pytest.raises(SamplingBudgetError, match="20000 draws"):
        simulate_dataset(params)


def test_null_case_pca_near_chance():
    params = SimulationParams(k=10, n=600, p_yes=0.3, beta=1.0, alpha_bar=0.0, sigma_alpha=0.0, seed=3)
    table = replicate_study(params, 100, ["pca"])
    assert 0.5 <= table["auroc"].mean() <= 0.62


@pytest.mark.slow
def test_null_case_no_method_above_bound():
    params = SimulationParams(k=10, n=200, p_yes=0.3, beta=1.0, alpha_bar=0.0, sigma_alpha=0.0, seed=4)
    methods = ["mean", "median", "pca", "factor_analysis", "mds", "isomap(10)", "lle(10)", "spectral(10)"]
    table = replicate_study(params, 100, methods)
    means = table.groupby("method")["auroc"].mean()
    assert len(means) == len(methods)
    assert (means <= 0.65).all(), means.to_dict()


def test_single_replicate_matches_direct_pipeline():
    table = replicate_study(SMALL, 1, ["pca", "mean"])
    ds = simulate_dataset(SMALL.with_(seed=derive_seed(SMALL.seed, 0)))
    for method in ["pca", "mean"]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scores = aggregate(ds.matrix, AggregatorSpec.parse(method))
        rep = evaluate_two_sided(scores, ds.truth)
        row = table[table["method"] == method].iloc[0]
        assert row["auroc"] == rep.auroc and row["aupr"] == rep.aupr
        assert row["spearman_abs"] == spearman_abs(scores, ds.probs)
        assert row["seed"] == derive_seed(SMALL.seed, 0)


def test_study_is_deterministic_and_schema():
    a = replicate_study(SMALL, 4, ["pca", "sml"])
    b = replicate_study(SMALL, 4, ["pca", "sml"])
    assert list(a.columns) == STUDY_COLUMNS
    assert a.equals(b)
    assert len(a) == 8
    sml = a[a["method"] == "sml"]
    assert (sml["data"] == "binarized").all()
    assert sml.loc[~sml["excluded"], "tpr_diff"].notna().all()


def test_parallel_matches_serial():
    a = replicate_study(SMALL, 3, ["pca", "sml"], workers=1)
    b = replicate_study(SMALL, 3, ["pca", "sml"], workers=2)
    assert a.equals(b)


def test_failures_are_recorded_not_raised():
    # isomap with one neighbour disconnects on simulated data; the study still completes
    table = replicate_study(SMALL, 2, ["pca", "isomap(1)"])
    iso = table[table["method"] == "isomap(1)"]
    assert iso["excluded"].all() and iso["error"].str.contains("ConnectivityError").all()
    assert not table[table["method"] == "pca"]["excluded"].any()


def test_k_sweep_spearman_nondecreasing():
    params = SimulationParams(k=4, n=300, p_yes=0.3, beta=1.0, alpha_bar=1.5, sigma_alpha=0.5, seed=21)
    table = convergence_study(params, [4, 8, 16, 32, 64], 50, ["pca"])
    medians = table.groupby("k")["spearman_abs"].median().sort_index().to_numpy()
    assert np.all(np.diff(medians) >= 0), medians


def test_tpr_summary_one_sided():
    table = replicate_study(SMALL, 10, ["pca", "sml"])
    s = summarize_tpr_difference(table)
    d = table.loc[table["method"] == "sml", "tpr_diff"].dropna()
    assert s.n == len(d) and s.mean == pytest.approx(d.mean())
    assert 0 <= s.p_value <= 1
