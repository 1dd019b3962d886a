"""Generative crowd simulation and replicated studies."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .aggregators import AggregatorSpec, Method, aggregate, sml_predictions
from .core import (
    ClassProbabilities,
    CrowdWisdomError,
    GroundTruth,
    Kind,
    ResponseMatrix,
    SamplingBudgetError,
    ValidationError,
)
from .metrics import (
    auroc,
    evaluate_two_sided,
    proportion_of_differences,
    roc_curve,
    roc_point,
    spearman_abs,
    tpr_difference_at_fpr,
)
from .preprocess import normalize, perfect_binarize
from .rng import MASK64, beta_symmetric, derive_seed, generator, normal, uniform

@dataclass(frozen=True)
class SimulationParams:
    k: int
    n: int
    p_yes: float
    beta: float
    alpha_bar: float
    sigma_alpha: float
    seed: int = 0

    def __post_init__(self):
        problems = []
        for name in ("p_yes", "beta", "alpha_bar", "sigma_alpha"):
            if not math.isfinite(getattr(self, name)):
                problems.append(f"{name} must be finite")
        if self.k < 2:
            problems.append(f"k must be at least 2, got {self.k}")
        if self.n < 3:
            problems.append(f"n must be at least 3, got {self.n}")
        if not 0 < self.p_yes < 1:
            problems.append(f"p_yes must be in (0, 1), got {self.p_yes}")
        elif not 1 <= self.n_yes <= self.n - 1:
            problems.append(f"round(n * p_yes) = {self.n_yes} leaves a class empty")
        if not self.beta > 0:
            problems.append(f"beta must be positive, got {self.beta}")
        if self.sigma_alpha < 0:
            problems.append(f"sigma_alpha must be nonnegative, got {self.sigma_alpha}")
        if not 0 <= self.seed <= MASK64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def n_yes(self) -> int:
        return int(math.floor(self.n * self.p_yes + 0.5))

    def with_(self, **changes) -> "SimulationParams":
        return replace(self, **changes)


_BASE = SimulationParams(k=10, n=600, p_yes=0.3, beta=1.0, alpha_bar=1.5, sigma_alpha=0.5)

PRESETS: dict[str, SimulationParams] = {
    "SIM-BASE": _BASE,
    "SIM-HARD": _BASE.with_(beta=3.0),
    "SIM-ADVERSARIAL": _BASE.with_(alpha_bar=0.5, sigma_alpha=1.0),
    "SIM-SMALL": _BASE.with_(n=100),
    "SIM-LARGE-K": _BASE.with_(k=64),
}


def preset(name: str, **overrides) -> SimulationParams:
    try:
        params = PRESETS[name.upper()]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return params.with_(**overrides) if overrides else params


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    params: SimulationParams
    matrix: ResponseMatrix
    raw_matrix: ResponseMatrix
    truth: GroundTruth
    probs: ClassProbabilities
    alphas: np.ndarray


def simulate_dataset(params: SimulationParams) -> SimulatedDataset:
    """Draw class probabilities, classes, skills and responses from one seed.

    Questions are drawn in batches of n. The first round(n p_yes) yes-class
    draws and the first n - round(n p_yes) no-class draws are kept in draw
    order, then shuffled.
    """
    rng = generator(params.seed)
    n, k = params.n, params.k
    need_yes, need_no = params.n_yes, n - params.n_yes
    yes_p: list[np.ndarray] = []
    no_p: list[np.ndarray] = []
    got_yes = got_no = drawn = 0
    budget = 1000 * n
    while got_yes < need_yes or got_no < need_no:
        if drawn >= budget:
            raise SamplingBudgetError(
                f"filled {got_yes}/{need_yes} yes and {got_no}/{need_no} no questions "
                f"after {drawn} draws; p_yes={params.p_yes} and beta={params.beta} are incompatible")
        p = beta_symmetric(rng, params.beta, n)
        is_yes = uniform(rng, n) < p
        drawn += n
        take = p[is_yes][: need_yes - got_yes]
        yes_p.append(take)
        got_yes += len(take)
        take = p[~is_yes][: need_no - got_no]
        no_p.append(take)
        got_no += len(take)

    probs = np.concatenate(yes_p + no_p)
    labels = np.r_[np.ones(need_yes, dtype=np.int64), np.zeros(need_no, dtype=np.int64)]
    perm = rng.permutation(n)
    probs, labels = probs[perm], labels[perm]

    alphas = params.alpha_bar + params.sigma_alpha * normal(rng, k)
    responses = alphas[:, None] * probs[None, :] + normal(rng, (k, n))

    raw = ResponseMatrix.from_array(responses, kind=Kind.CONTINUOUS)
    matrix, _ = normalize(raw)
    alphas.setflags(write=False)
    return SimulatedDataset(params, matrix, raw, GroundTruth(labels), ClassProbabilities(probs), alphas)


# replicated studies

STUDY_COLUMNS = [
    "replicate", "seed", "k", "n", "method", "data", "auroc", "aupr",
    "orientation_auroc", "orientation_aupr", "spearman_abs", "auroc_minus_probs",
    "sml_fpr", "sml_tpr", "tpr_diff", "prop_diff", "excluded", "error",
]


def _as_specs(methods) -> list[AggregatorSpec]:
    return [m if isinstance(m, AggregatorSpec) else AggregatorSpec.parse(str(m)) for m in methods]


def _blank_row(r: int, seed: int, params: SimulationParams, spec: AggregatorSpec, data: str) -> dict:
    row = dict.fromkeys(STUDY_COLUMNS, np.nan)
    row.update(replicate=r, seed=seed, k=params.k, n=params.n, method=spec.tag, data=data,
               orientation_auroc="", orientation_aupr="", excluded=False, error="")
    return row


def run_replicate(params: SimulationParams, r: int, methods: Sequence[AggregatorSpec],
                  binarize: bool) -> list[dict]:
    """Simulate replicate ``r`` and evaluate every method on it."""
    seed = derive_seed(params.seed, r)
    rep = params.with_(seed=seed)
    methods = _as_specs(methods)
    try:
        ds = simulate_dataset(rep)
    except CrowdWisdomError as exc:
        rows = []
        for spec in methods:
            row = _blank_row(r, seed, params, spec, "")
            row.update(excluded=True, error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
        return rows

    needs_binary = binarize or any(s.method is Method.SML for s in methods)
    binary = None
    if needs_binary:
        raw_binary = perfect_binarize(ds.raw_matrix, ds.truth, derive_seed(seed, 1))
        binary, _ = normalize(raw_binary)
    probs_auroc = evaluate_two_sided(ds.probs.probs, ds.truth).auroc

    rows = []
    scores_by_tag = {}
    for spec in methods:
        use_binary = binarize or spec.method is Method.SML
        row = _blank_row(r, seed, params, spec, "binarized" if use_binary else "continuous")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                scores = aggregate(binary if use_binary else ds.matrix, spec)
            report = evaluate_two_sided(scores, ds.truth)
            row.update(auroc=report.auroc, aupr=report.aupr,
                       orientation_auroc=report.orientation_auroc.value,
                       orientation_aupr=report.orientation_aupr.value,
                       auroc_minus_probs=report.auroc - probs_auroc)
            try:
                row["spearman_abs"] = spearman_abs(scores, ds.probs)
            except ValidationError:
                pass
            scores_by_tag[spec.tag] = (scores, report)
        except CrowdWisdomError as exc:
            row.update(excluded=True, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)

    pca = scores_by_tag.get("pca")
    for row in rows:
        if not row["method"].startswith("sml") or row["method"] not in scores_by_tag or pca is None:
            continue
        sml_scores, _ = scores_by_tag[row["method"]]
        preds = sml_predictions(sml_scores)
        if len(np.unique(preds)) < 2:
            row.update(excluded=True, error="single-valued binary crowd wisdom")
            continue
        if auroc(preds, ds.truth) < 0.5:
            preds = 1 - preds
        fpr, tpr = roc_point(preds, ds.truth)
        pca_scores, pca_report = pca
        oriented = pca_scores.scores if pca_report.orientation_auroc.value == "as_computed" else -pca_scores.scores
        row.update(sml_fpr=fpr, sml_tpr=tpr,
                   tpr_diff=tpr_difference_at_fpr(roc_curve(oriented, ds.truth), (fpr, tpr)),
                   prop_diff=proportion_of_differences(preds, pca_scores.scores))
    return rows


def _run_one(args):
    return run_replicate(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CROWDWISDOM_WORKERS", "1")))
    except ValueError:
        return 1


def replicate_study(params: SimulationParams, replicates: int, methods,
                    binarize: bool = False, workers: Optional[int] = None) -> pd.DataFrame:
    """One row per (replicate, method); failures are flagged in ``excluded``."""
    if replicates < 1:
        raise ValidationError("replicates must be at least 1")
    methods = _as_specs(methods)
    if not methods:
        raise ValidationError("no methods given")
    workers = default_workers() if workers is None else workers
    jobs = [(params, r, methods, binarize) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(job) for job in jobs]
    table = pd.DataFrame([row for chunk in chunks for row in chunk], columns=STUDY_COLUMNS)
    return table


def convergence_study(params: SimulationParams, ks: Sequence[int], replicates: int, methods,
                      binarize: bool = False, workers: Optional[int] = None) -> pd.DataFrame:
    """Repeat the replicate study at each individual count in ``ks``."""
    tables = [replicate_study(params.with_(k=int(k)), replicates, methods, binarize, workers) for k in ks]
    return pd.concat(tables, ignore_index=True)


@dataclass(frozen=True)
class TprDifferenceSummary:
    n: int
    mean: float
    sd: float
    t_statistic: float
    p_value: float


def summarize_tpr_difference(table: pd.DataFrame, method: str = "sml") -> TprDifferenceSummary:
    """Mean TPR difference and its one-sided t-test against zero (H1: mean > 0)."""
    d = table.loc[(table["method"] == method) & ~table["excluded"].astype(bool), "tpr_diff"].dropna()
    d = d.to_numpy(dtype=float)
    if len(d) < 2:
        return TprDifferenceSummary(len(d), float(np.mean(d)) if len(d) else np.nan, np.nan, np.nan, np.nan)
    res = stats.ttest_1samp(d, 0.0, alternative="greater")
    return TprDifferenceSummary(len(d), float(d.mean()), float(d.std(ddof=1)),
                                float(res.statistic), float(res.pvalue))


def summary_dict(summary: TprDifferenceSummary) -> dict:
    return asdict(summary)
