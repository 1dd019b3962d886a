"""On-disk formats: responses/truth/probs/alphas/scores CSV and JSON reports.

All floats are written with 17 significant digits so a write-read round trip
is exact. Files are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    AlignmentError,
    ClassProbabilities,
    GroundTruth,
    Kind,
    Orientation,
    ResponseMatrix,
    ScoreVector,
    ValidationError,
)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _csv_text(header: Sequence[str], rows: Iterable[Sequence], preamble: str = "") -> str:
    buf = io.StringIO()
    buf.write(preamble)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read_rows(path) -> tuple[list[str], list[list[str]], dict[str, str]]:
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValidationError(f"{path}: no header row")
    return rows[0], rows[1:], meta


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {text!r} as a number") from None


def write_responses(path, matrix: ResponseMatrix) -> None:
    """One row per question: question_id, then one column per individual."""
    values = np.asarray(matrix.values)
    rows = ([q, *(fmt(v) for v in values[:, i])] for i, q in enumerate(matrix.question_ids))
    text = _csv_text(["question_id", *matrix.individual_ids], rows, f"#kind={matrix.kind.value}\n")
    atomic_write(path, text)


def read_responses(path) -> ResponseMatrix:
    header, rows, meta = _read_rows(path)
    if not header or header[0] != "question_id":
        raise ValidationError(f"{path}: first column must be question_id")
    ids = header[1:]
    qids, data = [], []
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}: line {r} has {len(row)} fields, expected {len(header)}")
        qids.append(row[0])
        data.append([_float(x, f"{path}: line {r}") for x in row[1:]])
    kind = meta.get("kind")
    if kind is not None and kind not in (Kind.CONTINUOUS.value, Kind.BINARY.value):
        raise ValidationError(f"{path}: unknown kind {kind!r}")
    values = np.array(data, dtype=float).T if data else np.zeros((len(ids), 0))
    return ResponseMatrix.from_array(values, kind=kind, individual_ids=ids, question_ids=qids)


def _write_pairs(path, header, ids, values, conv=fmt) -> None:
    atomic_write(path, _csv_text(header, ([i, conv(v)] for i, v in zip(ids, values))))


def _read_pairs(path, header) -> tuple[list[str], list[str]]:
    got, rows, _ = _read_rows(path)
    if got[: len(header)] != list(header):
        raise ValidationError(f"{path}: expected columns {','.join(header)}, got {','.join(got)}")
    return [r[0] for r in rows], [r[1] for r in rows]


def write_truth(path, question_ids, truth: GroundTruth) -> None:
    _write_pairs(path, ["question_id", "label"], question_ids, truth.labels, conv=lambda v: str(int(v)))


def read_truth(path) -> tuple[list[str], GroundTruth]:
    ids, raw = _read_pairs(path, ["question_id", "label"])
    labels = []
    for i, x in zip(ids, raw):
        v = _float(x, f"{path}: question {i}")
        if v not in (0.0, 1.0):
            raise ValidationError(f"{path}: label {x!r} for question {i} is not 0/1")
        labels.append(int(v))
    return ids, GroundTruth(labels)


def write_probs(path, question_ids, probs: ClassProbabilities) -> None:
    _write_pairs(path, ["question_id", "prob"], question_ids, probs.probs)


def read_probs(path) -> tuple[list[str], ClassProbabilities]:
    ids, raw = _read_pairs(path, ["question_id", "prob"])
    return ids, ClassProbabilities([_float(x, str(path)) for x in raw])


def write_alphas(path, individual_ids, alphas) -> None:
    _write_pairs(path, ["individual_id", "alpha"], individual_ids, alphas)


def read_alphas(path) -> tuple[list[str], np.ndarray]:
    ids, raw = _read_pairs(path, ["individual_id", "alpha"])
    return ids, np.array([_float(x, str(path)) for x in raw])


def write_scores(path, question_ids, scores: ScoreVector) -> None:
    rows = ([q, fmt(s), scores.orientation.value] for q, s in zip(question_ids, scores.scores))
    atomic_write(path, _csv_text(["question_id", "score", "orientation"], rows,
                                 f"#method={scores.method_tag}\n" if scores.method_tag else ""))


def read_scores(path) -> tuple[list[str], ScoreVector]:
    header, rows, meta = _read_rows(path)
    if header[:2] != ["question_id", "score"]:
        raise ValidationError(f"{path}: expected columns question_id,score[,orientation]")
    ids = [r[0] for r in rows]
    scores = [_float(r[1], str(path)) for r in rows]
    orient = {r[2] for r in rows if len(r) > 2}
    orientation = Orientation(orient.pop()) if len(orient) == 1 else Orientation.AS_COMPUTED
    return ids, ScoreVector(scores, orientation, meta.get("method", ""))


def check_alignment(expected: Sequence[str], got: Sequence[str], what: str) -> None:
    """Question ids must match one-for-one, in order."""
    expected, got = list(expected), list(got)
    if expected == got:
        return
    missing = sorted(set(expected) - set(got))
    extra = sorted(set(got) - set(expected))
    misplaced = [e for e, g in zip(expected, got) if e != g and e in got]
    parts = []
    if missing:
        parts.append(f"missing ids {missing[:20]}")
    if extra:
        parts.append(f"unexpected ids {extra[:20]}")
    if misplaced and not (missing or extra):
        parts.append(f"ids out of order {misplaced[:20]}")
    if len(expected) != len(got):
        parts.append(f"{len(got)} rows vs {len(expected)}")
    raise AlignmentError(f"{what}: question ids do not align: " + "; ".join(parts))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_table(path, table) -> None:
    atomic_write(path, table.to_csv(index=False, float_format="%.17g", lineterminator="\n"))
