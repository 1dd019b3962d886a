"""Command-line entry point.

Exit codes: 0 ok, 1 verification mismatch, 2 validation, 3 numerical or
connectivity, 4 I/O, 5 alignment.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from . import formats
from .aggregators import AggregatorSpec, Method, aggregate, default_grid
from .core import CrowdWisdomError, ValidationError, require_valid
from .metrics import evaluate_two_sided, pr_curve, roc_curve
from .preprocess import normalize
from .simulator import (
    PRESETS,
    SimulationParams,
    convergence_study,
    default_workers,
    preset,
    replicate_study,
    simulate_dataset,
    summarize_tpr_difference,
    summary_dict,
)
from .supervised import SplitSpec, ClassifierSpec, cv_compare, default_classifiers

EXIT_OK, EXIT_MISMATCH, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO, EXIT_ALIGNMENT = 0, 1, 2, 3, 4, 5
MANIFEST = "manifest.json"
PATH_ARGS = ("input", "scores", "truth", "responses")


# manifests


def _manifest_path(args) -> Path:
    out = Path(args.out)
    return out / MANIFEST if args.command == "simulate" else out.with_name(out.name + ".manifest.json")


def _write_manifest(args, outputs: list[Path]) -> Path:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "verify", "out", "workers")}
    inputs = {k: formats.sha256(params[k]) for k in PATH_ARGS if params.get(k)}
    manifest = {
        "command": args.command,
        "parameters": params,
        "seed": params.get("seed") if params.get("seed") is not None else 0,
        "artifact_version": __version__,
        "input_digests": inputs,
        "output_name": Path(args.out).name,
        "output_digests": {p.name: formats.sha256(p) for p in outputs},
    }
    path = _manifest_path(args)
    formats.write_json(path, manifest)
    return path


def verify_manifest(path) -> list[str]:
    """Re-run a manifest into a scratch directory; return mismatching output names."""
    manifest = json.loads(Path(path).read_text())
    params = dict(manifest["parameters"])
    for key, digest in manifest.get("input_digests", {}).items():
        if formats.sha256(params[key]) != digest:
            raise ValidationError(f"input {params[key]} changed since the run (digest mismatch)")
    scratch = Path(tempfile.mkdtemp(prefix="crowdwisdom-verify-"))
    try:
        outputs = manifest["output_digests"]
        if manifest["command"] == "simulate":
            out = scratch
        else:
            out = scratch / manifest["output_name"]
        args = argparse.Namespace(**params, out=str(out), verify=False, workers=None)
        produced = COMMANDS[manifest["command"]](args)
        got = {p.name: formats.sha256(p) for p in produced}
        return sorted(name for name in outputs if got.get(name) != outputs[name])
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _finish(args, outputs: list[Path]) -> int:
    manifest = _write_manifest(args, outputs)
    if getattr(args, "verify", False):
        bad = verify_manifest(manifest)
        if bad:
            print(f"verification failed: {', '.join(bad)} differ", file=sys.stderr)
            return EXIT_MISMATCH
        print("verification passed: outputs are bit-identical", file=sys.stderr)
    return EXIT_OK


# commands


def _params_from_args(args) -> SimulationParams:
    base = PRESETS[args.preset] if args.preset else preset("SIM-BASE")
    changes = {}
    for name in ("k", "n", "p_yes", "beta", "alpha_bar", "sigma_alpha", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    return base.with_(**changes)


def run_simulate(args) -> list[Path]:
    params = _params_from_args(args)
    ds = simulate_dataset(params)
    out = Path(args.out)
    raw = ds.raw_matrix
    paths = [out / "responses.csv", out / "truth.csv", out / "probs.csv", out / "alphas.csv"]
    formats.write_responses(paths[0], raw)
    formats.write_truth(paths[1], raw.question_ids, ds.truth)
    formats.write_probs(paths[2], raw.question_ids, ds.probs)
    formats.write_alphas(paths[3], raw.individual_ids, ds.alphas)
    return paths


def _load_responses(path):
    matrix = formats.read_responses(path)
    require_valid(matrix)
    return matrix


def run_aggregate(args) -> list[Path]:
    matrix = _load_responses(args.input)
    spec = AggregatorSpec(Method(args.method), args.neighbors)
    spec.check_against(matrix.n)
    normalized, constant = normalize(matrix)
    for j in constant:
        print(f"warning: individual {matrix.individual_ids[j]!r} is constant", file=sys.stderr)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scores = aggregate(normalized, spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    formats.write_scores(out, matrix.question_ids, scores)
    return [out]


def run_evaluate(args) -> list[Path]:
    ids, scores = formats.read_scores(args.scores)
    truth_ids, truth = formats.read_truth(args.truth)
    formats.check_alignment(truth_ids, ids, f"{args.scores} vs {args.truth}")
    report = evaluate_two_sided(scores, truth)
    s = np.asarray(scores.scores)
    roc = roc_curve(s if report.orientation_auroc.value == "as_computed" else -s, truth)
    pr = pr_curve(s if report.orientation_aupr.value == "as_computed" else -s, truth)
    doc = {
        "method_tag": report.method_tag,
        "n": len(s),
        "n_positive": truth.n_positive,
        "auroc": report.auroc,
        "aupr": report.aupr,
        "orientation": {"auroc": report.orientation_auroc, "aupr": report.orientation_aupr},
        "roc": {"fpr": roc.fpr, "tpr": roc.tpr, "thresholds": roc.thresholds},
        "pr": {"precision": pr.precision, "recall": pr.recall, "thresholds": pr.thresholds},
    }
    out = Path(args.out)
    formats.write_json(out, doc)
    return [out]


DEFAULT_STUDY_METHODS = {
    "binarization": "pca,sml",
    "convergence": "pca,factor_analysis,mds,isomap(10),lle(10),spectral(10),mean,median",
}


def _methods(text: str) -> list[AggregatorSpec]:
    try:
        return [AggregatorSpec.parse(part) for part in _split(text)]
    except ValueError as exc:
        raise ValidationError(f"bad method list {text!r}: {exc}") from None


def _split(text: str) -> list[str]:
    """Split a comma list, keeping commas inside parentheses."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def run_study(args) -> list[Path]:
    out = Path(args.out)
    summary_path = out.with_name(out.stem + ".summary.json")
    workers = args.workers if getattr(args, "workers", None) else default_workers()
    if args.compare == "cv":
        table, summary = _cv_study(args)
    else:
        params = _params_from_args(args)
        methods = _methods(args.methods or DEFAULT_STUDY_METHODS[args.compare])
        if args.compare == "binarization":
            table = replicate_study(params, args.replicates, methods,
                                    binarize=args.pca_on == "binarized", workers=workers)
            summary = _binarization_summary(table)
        else:
            ks = [int(x) for x in _split(args.ks)]
            table = convergence_study(params, ks, args.replicates, methods, workers=workers)
            summary = _convergence_summary(table)
    formats.write_table(out, table)
    formats.write_json(summary_path, summary)
    return [out, summary_path]


def _binarization_summary(table: pd.DataFrame) -> dict:
    summary = {"excluded": int(table["excluded"].sum())}
    for tag in sorted(t for t in table["method"].unique() if t.startswith("sml")):
        rows = table[(table["method"] == tag) & ~table["excluded"].astype(bool)]
        prop = rows["prop_diff"].dropna()
        summary[tag] = {
            "tpr_difference": summary_dict(summarize_tpr_difference(table, tag)),
            "proportion_of_differences": {"n": len(prop), "mean": prop.mean(), "sd": prop.std(ddof=1),
                                          "median": prop.median()},
        }
    return summary


def _convergence_summary(table: pd.DataFrame) -> dict:
    ok = table[~table["excluded"].astype(bool)]
    med = ok.groupby(["k", "method"])[["spearman_abs", "auroc_minus_probs"]].median()
    return {"median": [{"k": int(k), "method": m, **row} for (k, m), row in med.to_dict("index").items()],
            "excluded": int(table["excluded"].sum())}


def _cv_study(args):
    if args.responses or args.truth:
        if not (args.responses and args.truth):
            raise ValidationError("cv study needs both --responses and --truth")
        raw = _load_responses(args.responses)
        ids, truth = formats.read_truth(args.truth)
        formats.check_alignment(raw.question_ids, ids, f"{args.responses} vs {args.truth}")
        require_valid(raw, truth)
        matrix, _ = normalize(raw)
    else:
        ds = simulate_dataset(_params_from_args(args))
        matrix, truth = ds.matrix, ds.truth
    crowd = _methods(args.methods) if args.methods else default_grid(matrix.n)
    spec = SplitSpec(args.fraction, args.replicates, args.seed if args.seed is not None else 0)
    n_train = int(np.floor(args.fraction * matrix.n + 0.5))
    try:
        classifiers = ([ClassifierSpec.parse(c) for c in _split(args.classifiers)]
                       if args.classifiers else default_classifiers(n_train))
    except ValueError as exc:
        raise ValidationError(f"bad classifier list {args.classifiers!r}: {exc}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = cv_compare(matrix, truth, crowd, classifiers, spec)
    med = result.medians()
    summary = {
        "skipped": [{"repeat": r, "reason": why} for r, why in result.skipped],
        "median": [{"family": f, "method": m, **row} for (f, m), row in med.to_dict("index").items()],
        "best": {fam: {met: result.best(fam, met) for met in ("auroc", "aupr")}
                 for fam in ("crowd", "supervised")},
    }
    return result.table, summary


COMMANDS = {
    "simulate": run_simulate,
    "aggregate": run_aggregate,
    "evaluate": run_evaluate,
    "study": run_study,
}


# argument parsing


def _add_sim_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named parameter set (default SIM-BASE); flags below override it")
    p.add_argument("--k", type=int, help="number of individuals")
    p.add_argument("--n", type=int, help="number of questions")
    p.add_argument("--p-yes", dest="p_yes", type=float, help="fraction of yes-class questions")
    p.add_argument("--beta", type=float, help="Beta(beta, beta) shape of class probabilities")
    p.add_argument("--alpha-bar", dest="alpha_bar", type=float, help="mean individual skill")
    p.add_argument("--sigma-alpha", dest="sigma_alpha", type=float, help="skill spread")
    p.add_argument("--seed", type=int, help="64-bit seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdwisdom",
                                     description="Crowd-wisdom consensus by one-dimensional dimension reduction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a crowd dataset")
    _add_sim_params(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--verify", action="store_true", help="re-run from the manifest and compare outputs")

    p = sub.add_parser("aggregate", help="consensus scores from a responses file")
    p.add_argument("--in", dest="input", required=True, help="responses.csv")
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--neighbors", type=int, default=None, help="neighbor count for isomap/lle/spectral")
    p.add_argument("--out", required=True, help="scores.csv")
    p.add_argument("--verify", action="store_true")

    p = sub.add_parser("evaluate", help="two-sided AUROC/AUPR of a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="report.json")
    p.add_argument("--verify", action="store_true")

    p = sub.add_parser("study", help="replicated simulation or cross-validation study")
    _add_sim_params(p)
    p.add_argument("--compare", required=True, choices=["binarization", "convergence", "cv"])
    p.add_argument("--replicates", type=int, default=200, help="replicates (cv: split repeats)")
    p.add_argument("--methods", default=None, help="comma list, e.g. pca,sml,isomap(10)")
    p.add_argument("--pca-on", dest="pca_on", choices=["continuous", "binarized"], default="continuous",
                   help="binarization study: data fed to non-SML methods")
    p.add_argument("--ks", default="4,8,16,32,64", help="convergence study: individual counts")
    p.add_argument("--fraction", type=float, default=0.25, help="cv study: training fraction")
    p.add_argument("--classifiers", default=None, help="cv study: comma list, e.g. ols,lda,knn(10)")
    p.add_argument("--responses", default=None, help="cv study on a responses.csv instead of a simulation")
    p.add_argument("--truth", default=None, help="truth.csv matching --responses")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel replicate workers (default $CROWDWISDOM_WORKERS or 1)")
    p.add_argument("--out", required=True, help="table.csv")
    p.add_argument("--verify", action="store_true")

    p = sub.add_parser("verify", help="re-run a manifest and compare outputs bit for bit")
    p.add_argument("manifest")
    return parser


def _absolutize(args) -> None:
    for key in PATH_ARGS:
        if getattr(args, key, None):
            setattr(args, key, str(Path(getattr(args, key)).resolve()))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            bad = verify_manifest(args.manifest)
            if bad:
                print(f"verification failed: {', '.join(bad)} differ", file=sys.stderr)
                return EXIT_MISMATCH
            print("verification passed: outputs are bit-identical", file=sys.stderr)
            return EXIT_OK
        _absolutize(args)
        outputs = COMMANDS[args.command](args)
        for path in outputs:
            print(path)
        return _finish(args, outputs)
    except CrowdWisdomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
