"""Wisdom-of-the-crowd consensus scores from one-dimensional dimension reduction."""

__version__ = "0.1.0"

from .core import (
    ClassProbabilities,
    CrowdWisdomError,
    GroundTruth,
    Kind,
    Orientation,
    ResponseMatrix,
    ScoreVector,
    validate_dataset,
)
from .preprocess import normalize, perfect_binarize, rank_transform, standardize
from .aggregators import AggregatorSpec, Method, aggregate, align_to_majority, threshold_scores
from .metrics import evaluate_two_sided, pr_curve, roc_curve, spearman_abs
from .simulator import PRESETS, SimulationParams, preset, replicate_study, simulate_dataset
from .supervised import SplitSpec, cv_compare, fit_predict, stratified_shuffle_split

__all__ = [
    "AggregatorSpec", "ClassProbabilities", "CrowdWisdomError", "GroundTruth", "Kind", "Method",
    "Orientation", "PRESETS", "ResponseMatrix", "ScoreVector", "SimulationParams", "SplitSpec",
    "aggregate", "align_to_majority", "cv_compare", "evaluate_two_sided", "fit_predict", "normalize",
    "perfect_binarize", "pr_curve", "preset", "rank_transform", "replicate_study", "roc_curve",
    "simulate_dataset", "spearman_abs", "standardize", "stratified_shuffle_split", "threshold_scores",
    "validate_dataset",
]
