"""The detection pipeline: run both detectors per column, calibrate, combine
with max, threshold into verdicts; plus the five-fold evaluation harness and
the JSON report writer.

The max ensemble is deliberate: a column flagged by either detector stays
flagged, because a missed PHI column costs far more than a false alarm.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__ as _tool_version
from .gbt import (
    GbtModel,
    TrainParams,
    apply_calibration,
    model_hash,
    predict_margin_batch,
    stratified_fold_assignments,
    train_calibrated,
)
from .explain import Explainer
from .ingest import Dataset, EmptySampleError, sample_column
from .metafeatures import MetaFeatureVector
from .metrics import METRIC_NAMES, MetricSet, compute_metrics
from .parallel import extract_features
from .patterns import PatternLibrary
from .screening import RegexVerdict, screen_column

__all__ = [
    "ColumnVerdict",
    "CrossValResult",
    "StratificationError",
    "scan",
    "extract_corpus",
    "cross_validate",
    "write_report",
    "build_report",
    "validate_report",
    "format_metrics_table",
    "cv_summary_doc",
    "DETECTORS",
]

DETECTORS = ("regex", "ml", "ensemble")

NO_DATA_FLAG = "no data"


class StratificationError(ValueError):
    """Not enough members of each class to stratify the requested folds."""


@dataclass
class ColumnVerdict:
    """Final per-column decision with the evidence that produced it."""

    column_name: str
    prob_regex: float
    prob_ml_raw: Optional[float]
    prob_ml_calibrated: Optional[float]
    prob_final: float
    predicted: int
    best_pattern_id: Optional[str] = None
    top_attributions: list = field(default_factory=list)
    flag: Optional[str] = None


@dataclass
class CrossValResult:
    folds: int
    threshold: float
    fold_of: list
    metrics: dict            # detector -> [MetricSet per fold]
    summary: dict            # detector -> metric -> (mean, std)
    fold_models: list


def scan(dataset: Dataset, model: GbtModel, library: PatternLibrary,
         k: int = 1000, seed: int = 42, threshold: float = 0.5,
         threads: int = 1, attribution_top_k: int = 5,
         background_size: int = 100) -> list:
    """Scan every column of a dataset into ColumnVerdicts.

    Each column is sampled once and the sample is shared by both detectors.
    All-null columns are never fatal: they come back flagged with final
    probability 0.  Attribution backgrounds are a seeded subsample of the
    scanned dataset's own feature vectors.
    """
    samples = []
    regex_verdicts = []
    classifiable = []
    for i, column in enumerate(dataset.columns):
        try:
            sample = sample_column(column, k, seed + i)
        except EmptySampleError:
            samples.append(None)
            regex_verdicts.append(None)
            continue
        samples.append(sample)
        regex_verdicts.append(screen_column(sample, library))
        classifiable.append(i)

    vectors = extract_features([samples[i] for i in classifiable], threads=threads)
    vector_of = dict(zip(classifiable, vectors))

    attributions = {}
    if classifiable and model.trees is not None:
        X = np.asarray([v.values for v in vectors], dtype=np.float64)
        if X.shape[0] > background_size:
            import random as _random

            bg_idx = sorted(_random.Random(seed).sample(range(X.shape[0]), background_size))
            background = X[bg_idx]
        else:
            background = X
        explainer = Explainer(model, background)
        phis = explainer.shap_matrix(X)
        for row, i in enumerate(classifiable):
            order = sorted(range(phis.shape[1]), key=lambda j: (-abs(phis[row, j]), j))
            attributions[i] = [
                {"slot": model.slot_names[j], "value": float(phis[row, j])}
                for j in order[:attribution_top_k]
            ]

    margins = predict_margin_batch(model, [vector_of[i] for i in classifiable]) if classifiable else np.empty(0)
    raw = 1.0 / (1.0 + np.exp(-np.clip(margins, -709, 709)))
    calibrated = apply_calibration(model, margins)

    verdicts = []
    row = 0
    for i, column in enumerate(dataset.columns):
        if samples[i] is None:
            verdicts.append(ColumnVerdict(
                column_name=column.name, prob_regex=0.0, prob_ml_raw=None,
                prob_ml_calibrated=None, prob_final=0.0, predicted=0,
                best_pattern_id=None, top_attributions=[], flag=NO_DATA_FLAG,
            ))
            continue
        rv: RegexVerdict = regex_verdicts[i]
        p_ml = float(calibrated[row])
        p_final = max(rv.prob_phi, p_ml)
        verdicts.append(ColumnVerdict(
            column_name=column.name,
            prob_regex=rv.prob_phi,
            prob_ml_raw=float(raw[row]),
            prob_ml_calibrated=p_ml,
            prob_final=p_final,
            predicted=1 if p_final >= threshold else 0,
            best_pattern_id=rv.best_pattern_id,
            top_attributions=attributions.get(i, []),
        ))
        row += 1
    return verdicts


def extract_corpus(datasets, library: PatternLibrary, k: int = 1000, seed: int = 42,
                   threads: int = 1, screen: bool = True):
    """Sample + featurize (+ screen) every column of a dataset collection.

    Columns are numbered globally across datasets for seed derivation, all-null
    columns are skipped, and labels come from the Column metadata (None when
    unlabeled).  Returns (vectors, labels, regex_probs, column_names).
    """
    samples = []
    labels = []
    names = []
    idx = 0
    for ds in datasets:
        for column in ds.columns:
            try:
                sample = sample_column(column, k, seed + idx)
            except EmptySampleError:
                idx += 1
                continue
            samples.append(sample)
            labels.append(column.label)
            names.append(column.name)
            idx += 1
    vectors = extract_features(samples, threads=threads)
    regex_probs = [screen_column(s, library).prob_phi for s in samples] if screen else None
    return vectors, labels, regex_probs, names


def _summarize(per_fold: dict) -> dict:
    summary = {}
    for detector, metric_sets in per_fold.items():
        det = {}
        for metric in METRIC_NAMES:
            values = [getattr(ms, metric) for ms in metric_sets]
            mean = statistics.fmean(values)
            std = statistics.stdev(values) if len(values) > 1 else 0.0
            det[metric] = (mean, std)
        summary[detector] = det
    return summary


def cross_validate(vectors, labels, regex_probs, folds: int = 5, seed: int = 42,
                   params: Optional[TrainParams] = None,
                   threshold: float = 0.5) -> CrossValResult:
    """Stratified k-fold evaluation of all three detectors.

    The regex screen needs no training, so its scores are fixed; the tree
    model (with its internal Platt fit) is retrained on each training split
    and scored on the held-out fold.
    """
    X = np.asarray(
        [v.values if isinstance(v, MetaFeatureVector) else v for v in vectors],
        dtype=np.float64,
    )
    y = np.asarray(labels, dtype=np.int64)
    r = np.asarray(regex_probs, dtype=np.float64)
    if not (X.shape[0] == y.shape[0] == r.shape[0]):
        raise ValueError("vectors, labels and regex_probs must align")
    n_pos = int(y.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos < folds or n_neg < folds:
        raise StratificationError(
            f"need at least {folds} of each class, got {n_pos} positive / {n_neg} negative"
        )
    fold_of = stratified_fold_assignments(y, folds, seed)
    per_fold = {d: [] for d in DETECTORS}
    fold_models = []
    for f in range(folds):
        test = fold_of == f
        model = train_calibrated(X[~test], y[~test], params, seed=seed + 1 + f)
        fold_models.append(model)
        ml_scores = apply_calibration(model, predict_margin_batch(model, X[test]))
        regex_scores = r[test]
        ens_scores = np.maximum(ml_scores, regex_scores)
        y_test = y[test]
        per_fold["regex"].append(compute_metrics(regex_scores, y_test, threshold))
        per_fold["ml"].append(compute_metrics(ml_scores, y_test, threshold))
        per_fold["ensemble"].append(compute_metrics(ens_scores, y_test, threshold))
    return CrossValResult(
        folds=folds,
        threshold=threshold,
        fold_of=fold_of.tolist(),
        metrics=per_fold,
        summary=_summarize(per_fold),
        fold_models=fold_models,
    )


def format_metrics_table(result: CrossValResult) -> str:
    """Mean(std) table, one row per detector."""
    header = ["model"] + list(METRIC_NAMES)
    rows = [header]
    for detector in DETECTORS:
        row = [detector]
        for metric in METRIC_NAMES:
            mean, std = result.summary[detector][metric]
            row.append(f"{mean:.3f}({std:.3f})")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def cv_summary_doc(result: CrossValResult) -> dict:
    return {
        "folds": result.folds,
        "threshold": result.threshold,
        "per_fold": {
            d: [ms.as_dict() for ms in result.metrics[d]] for d in DETECTORS
        },
        "summary": {
            d: {m: {"mean": result.summary[d][m][0], "std": result.summary[d][m][1]}
                for m in METRIC_NAMES}
            for d in DETECTORS
        },
    }


# ---------------------------------------------------------------------------
# Report document
# ---------------------------------------------------------------------------

# Structural schema for the scan report; validate_report checks against it.
REPORT_SCHEMA = {
    "meta": {
        "tool_version": str,
        "library_version": str,
        "model_hash": str,
        "k": int,
        "seed": int,
        "threshold": float,
    },
    "columns": [
        {
            "column": str,
            "prob_regex": float,
            "prob_ml_raw": (float, type(None)),
            "prob_ml_calibrated": (float, type(None)),
            "prob_final": float,
            "predicted": int,
            "best_pattern_id": (str, type(None)),
            "top_attributions": list,
            "flag": (str, type(None)),
        }
    ],
}


def build_report(verdicts, *, k: int, seed: int, threshold: float,
                 library_version: str, model: Optional[GbtModel] = None,
                 metrics: Optional[CrossValResult] = None) -> dict:
    """Assemble the report document with a deterministic field order."""
    doc = {
        "meta": {
            "tool_version": _tool_version,
            "library_version": library_version,
            "model_hash": model_hash(model) if model is not None else "",
            "k": k,
            "seed": seed,
            "threshold": float(threshold),
        },
        "columns": [
            {
                "column": v.column_name,
                "prob_regex": v.prob_regex,
                "prob_ml_raw": v.prob_ml_raw,
                "prob_ml_calibrated": v.prob_ml_calibrated,
                "prob_final": v.prob_final,
                "predicted": v.predicted,
                "best_pattern_id": v.best_pattern_id,
                "top_attributions": v.top_attributions,
                "flag": v.flag,
            }
            for v in verdicts
        ],
    }
    if metrics is not None:
        doc["metrics"] = {
            d: {m: {"mean": metrics.summary[d][m][0], "std": metrics.summary[d][m][1]}
                for m in METRIC_NAMES}
            for d in DETECTORS
        }
    return doc


def write_report(verdicts, path, *, k: int, seed: int, threshold: float,
                 library_version: str, model: Optional[GbtModel] = None,
                 metrics: Optional[CrossValResult] = None) -> dict:
    doc = build_report(verdicts, k=k, seed=seed, threshold=threshold,
                       library_version=library_version, model=model, metrics=metrics)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    return doc


def validate_report(doc: dict) -> None:
    """Raise ValueError if the document does not conform to REPORT_SCHEMA."""
    if not isinstance(doc, dict):
        raise ValueError("report must be an object")
    meta = doc.get("meta")
    if not isinstance(meta, dict):
        raise ValueError("report.meta missing")
    for key, typ in REPORT_SCHEMA["meta"].items():
        if key not in meta:
            raise ValueError(f"report.meta.{key} missing")
        if typ is float:
            if not isinstance(meta[key], (int, float)):
                raise ValueError(f"report.meta.{key} must be numeric")
        elif not isinstance(meta[key], typ):
            raise ValueError(f"report.meta.{key} has wrong type")
    columns = doc.get("columns")
    if not isinstance(columns, list):
        raise ValueError("report.columns must be an array")
    col_schema = REPORT_SCHEMA["columns"][0]
    for i, col in enumerate(columns):
        if not isinstance(col, dict):
            raise ValueError(f"report.columns[{i}] must be an object")
        for key, typ in col_schema.items():
            if key not in col:
                raise ValueError(f"report.columns[{i}].{key} missing")
            value = col[key]
            if typ is float:
                if not isinstance(value, (int, float)):
                    raise ValueError(f"report.columns[{i}].{key} must be numeric")
            elif isinstance(typ, tuple):
                ok = any(
                    isinstance(value, (int, float)) if t is float else isinstance(value, t)
                    for t in typ
                )
                if not ok:
                    raise ValueError(f"report.columns[{i}].{key} has wrong type")
            elif not isinstance(value, typ):
                raise ValueError(f"report.columns[{i}].{key} has wrong type")
        if col["predicted"] not in (0, 1):
            raise ValueError(f"report.columns[{i}].predicted must be 0 or 1")
