"""Engineered metadata features for a column sample and their flattening into
the fixed 49-slot vector consumed by the tree model.

The frequency-family statistics (cardinality, mode ratio, Gini impurity,
diversity index, ...) are computed on raw tokens for every type, so any
bijective recoding of a column's token alphabet leaves them bit-identical.
Numeric-family statistics use parsed values for int/float columns and epoch
seconds for datetime columns, and are missing-marked (NaN) for strings.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .ingest import ColumnSample, parse_datetime, parse_number

__all__ = [
    "MetaFeatures",
    "MetaFeatureVector",
    "SLOT_NAMES",
    "MISSING",
    "compute_metafeatures",
    "digit_precision_stats",
    "diversity_index",
    "gini_impurity",
    "histogram",
    "flatten",
    "write_matrix_csv",
    "read_matrix_csv",
]

# Missing statistics carry NaN, never a silent zero; the tree learner routes
# NaN through its default directions.
MISSING = float("nan")

DATA_TYPES = ("int", "float", "string", "datetime")

SLOT_NAMES = (
    ["type_int", "type_float", "type_string", "type_datetime"]
    + ["categorical", "order_asc", "order_desc", "null_count", "null_ratio"]
    + ["min", "max", "mode_ratio", "median", "mad", "sum", "mean",
       "variance", "stddev", "skewness", "kurtosis"]
    + ["num_zeros", "num_negatives"]
    + [f"hist_{i}" for i in range(10)]
    + ["bin_width"]
    + ["q05", "q25", "q75", "q95"]
    + ["unique_count", "unique_ratio", "max_category_ratio", "min_category_ratio",
       "gini_impurity", "diversity_index"]
    + ["precision_min", "precision_max", "precision_mean", "precision_var",
       "precision_std", "precision_moe"]
)
assert len(SLOT_NAMES) == 49

QUANTILE_POINTS = (0.05, 0.25, 0.75, 0.95)


@dataclass
class MetaFeatures:
    """Named engineered statistics for one sampled column."""

    data_type: str
    categorical: bool
    order_asc: bool
    order_desc: bool
    null_count: int
    null_ratio: float
    min: float
    max: float
    mode_ratio: float
    median: float
    mad: float
    sum: float
    mean: float
    variance: float
    stddev: float
    skewness: float
    kurtosis: float
    num_zeros: float
    num_negatives: float
    histogram_counts: list
    bin_width: float
    quantiles: list
    unique_count: int
    unique_ratio: float
    max_category_ratio: float
    min_category_ratio: float
    gini_impurity: float
    diversity_index: float
    precision_min: float
    precision_max: float
    precision_mean: float
    precision_var: float
    precision_std: float
    precision_moe: float


@dataclass
class MetaFeatureVector:
    """One row of the derived feature matrix: 49 reals in canonical slot order."""

    values: list
    column_name: str

    def __post_init__(self):
        if len(self.values) != len(SLOT_NAMES):
            raise ValueError(f"expected {len(SLOT_NAMES)} slots, got {len(self.values)}")


def gini_impurity(values: Sequence[str]) -> float:
    """1 - sum(p_i^2) over token frequencies; < 1, maximal for all-unique columns."""
    n = len(values)
    counts = sorted(Counter(values).values())
    return 1.0 - sum((c / n) ** 2 for c in counts)


def diversity_index(values: Sequence[str]) -> float:
    """Probability two entries drawn without replacement differ; 0 for a single entry."""
    n = len(values)
    if n <= 1:
        return 0.0
    counts = sorted(Counter(values).values())
    return 1.0 - sum(c * (c - 1) for c in counts) / (n * (n - 1))


def digit_precision_stats(values: Sequence[str]) -> tuple:
    """(min, max, mean, var, std, moe) of per-token digit counts.

    Digits are the characters 0-9 only: signs, separators, and decimal points
    do not count.  moe is the 95% normal-approximation margin of error
    1.96*std/sqrt(n).  An empty input yields six missing markers.
    """
    if not values:
        return (MISSING,) * 6
    counts = [sum(1 for ch in v if "0" <= ch <= "9") for v in values]
    n = len(counts)
    mean = sum(counts) / n
    var = sum((c - mean) ** 2 for c in counts) / n
    std = math.sqrt(var)
    moe = 1.96 * std / math.sqrt(n)
    return (float(min(counts)), float(max(counts)), mean, var, std, moe)


def histogram(values: Sequence[float]) -> tuple:
    """Normalized counts over 10 equal-width bins spanning [min, max].

    The last bin includes its right edge; a degenerate min==max column puts
    all mass in bin 0 with bin width 0.
    """
    n = len(values)
    lo, hi = min(values), max(values)
    counts = [0] * 10
    if lo == hi:
        counts[0] = n
        width = 0.0
    else:
        width = (hi - lo) / 10.0
        for x in values:
            b = int((x - lo) / width)
            if b > 9:
                b = 9
            elif b < 0:
                b = 0
            counts[b] += 1
    return [c / n for c in counts], width


def _median(sorted_xs: Sequence[float]) -> float:
    n = len(sorted_xs)
    mid = n // 2
    if n % 2:
        return sorted_xs[mid]
    return (sorted_xs[mid - 1] + sorted_xs[mid]) / 2.0


def _quantile(sorted_xs: Sequence[float], q: float) -> float:
    # Linear interpolation between order statistics.
    n = len(sorted_xs)
    if n == 1:
        return sorted_xs[0]
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return sorted_xs[n - 1]
    frac = h - lo
    return sorted_xs[lo] + frac * (sorted_xs[lo + 1] - sorted_xs[lo])


def _numeric_values(sample: ColumnSample):
    """Parsed numeric representation of the sample, in sample order.

    int/float columns parse tokens as numbers, datetime columns map to epoch
    seconds; unparseable stragglers (the <=5% the type inference tolerated)
    are skipped.  Returns (values, digit_tokens) where digit_tokens feed the
    precision statistics.
    """
    t = sample.inferred_type
    if t in ("int", "float"):
        pairs = [(v, parse_number(v)) for v in sample.values]
        xs = [x for _, x in pairs if x is not None]
        tokens = [v for v, x in pairs if x is not None]
        return xs, tokens
    if t == "datetime":
        xs = [e for e in (parse_datetime(v) for v in sample.values) if e is not None]
        return xs, [str(int(e)) for e in xs]
    return [], []


def compute_metafeatures(sample: ColumnSample) -> MetaFeatures:
    """Compute every engineered statistic for one column sample."""
    raw = sample.values
    k = len(raw)
    counts = Counter(raw)
    sorted_counts = sorted(counts.values())
    unique_count = len(counts)
    mode_ratio = sorted_counts[-1] / k
    categorical = unique_count <= max(20, 0.05 * k)

    xs, digit_tokens = _numeric_values(sample)
    if xs:
        ordered = xs
    else:
        ordered = raw
    order_asc = all(a <= b for a, b in zip(ordered, ordered[1:]))
    order_desc = all(a >= b for a, b in zip(ordered, ordered[1:]))

    if xs:
        n = len(xs)
        sorted_xs = sorted(xs)
        total = math.fsum(xs)
        mean = total / n
        m2 = math.fsum((x - mean) ** 2 for x in xs) / n
        std = math.sqrt(m2)
        if m2 > 0:
            m3 = math.fsum((x - mean) ** 3 for x in xs) / n
            m4 = math.fsum((x - mean) ** 4 for x in xs) / n
            skew = m3 / m2 ** 1.5
            kurt = m4 / (m2 * m2) - 3.0  # excess: normal 0, uniform -1.2
        else:
            skew = MISSING
            kurt = MISSING
        med = _median(sorted_xs)
        mad = _median(sorted(abs(x - med) for x in xs))
        hist_counts, bin_width = histogram(xs)
        quants = [_quantile(sorted_xs, q) for q in QUANTILE_POINTS]
        numeric = dict(
            min=sorted_xs[0], max=sorted_xs[-1], median=med, mad=mad, sum=total,
            mean=mean, variance=m2, stddev=std, skewness=skew, kurtosis=kurt,
            num_zeros=float(sum(1 for x in xs if x == 0)),
            num_negatives=float(sum(1 for x in xs if x < 0)),
            histogram_counts=hist_counts, bin_width=bin_width, quantiles=quants,
        )
    else:
        numeric = dict(
            min=MISSING, max=MISSING, median=MISSING, mad=MISSING, sum=MISSING,
            mean=MISSING, variance=MISSING, stddev=MISSING, skewness=MISSING,
            kurtosis=MISSING, num_zeros=MISSING, num_negatives=MISSING,
            histogram_counts=[MISSING] * 10, bin_width=MISSING,
            quantiles=[MISSING] * len(QUANTILE_POINTS),
        )

    p_min, p_max, p_mean, p_var, p_std, p_moe = digit_precision_stats(digit_tokens)

    return MetaFeatures(
        data_type=sample.inferred_type,
        categorical=categorical,
        order_asc=order_asc,
        order_desc=order_desc,
        null_count=sample.null_count,
        null_ratio=sample.null_count / sample.total_cells if sample.total_cells else 0.0,
        mode_ratio=mode_ratio,
        unique_count=unique_count,
        unique_ratio=unique_count / k,
        max_category_ratio=sorted_counts[-1] / k,
        min_category_ratio=sorted_counts[0] / k,
        gini_impurity=gini_impurity(raw),
        diversity_index=diversity_index(raw),
        precision_min=p_min, precision_max=p_max, precision_mean=p_mean,
        precision_var=p_var, precision_std=p_std, precision_moe=p_moe,
        **numeric,
    )


def flatten(features: MetaFeatures, column_name: str = "") -> MetaFeatureVector:
    """Emit the canonical 49-slot layout: type one-hot, 0/1 booleans, NaN markers."""
    v = [0.0] * len(SLOT_NAMES)
    v[DATA_TYPES.index(features.data_type)] = 1.0
    v[4] = 1.0 if features.categorical else 0.0
    v[5] = 1.0 if features.order_asc else 0.0
    v[6] = 1.0 if features.order_desc else 0.0
    v[7] = float(features.null_count)
    v[8] = features.null_ratio
    v[9] = features.min
    v[10] = features.max
    v[11] = features.mode_ratio
    v[12] = features.median
    v[13] = features.mad
    v[14] = features.sum
    v[15] = features.mean
    v[16] = features.variance
    v[17] = features.stddev
    v[18] = features.skewness
    v[19] = features.kurtosis
    v[20] = features.num_zeros
    v[21] = features.num_negatives
    v[22:32] = features.histogram_counts
    v[32] = features.bin_width
    v[33:37] = features.quantiles
    v[37] = float(features.unique_count)
    v[38] = features.unique_ratio
    v[39] = features.max_category_ratio
    v[40] = features.min_category_ratio
    v[41] = features.gini_impurity
    v[42] = features.diversity_index
    v[43] = features.precision_min
    v[44] = features.precision_max
    v[45] = features.precision_mean
    v[46] = features.precision_var
    v[47] = features.precision_std
    v[48] = features.precision_moe
    return MetaFeatureVector(values=v, column_name=column_name)


def featurize(sample: ColumnSample) -> MetaFeatureVector:
    """compute_metafeatures + flatten for one sample."""
    return flatten(compute_metafeatures(sample), column_name=sample.column_name)


def _fmt(x: float) -> str:
    return "NaN" if math.isnan(x) else repr(x)


def write_matrix_csv(vectors, path, labels: Optional[Sequence[int]] = None) -> None:
    """Serialize the derived matrix as CSV: slot-name header plus a trailing
    label column when labels are given; missing slots serialize as NaN."""
    if labels is not None and len(labels) != len(vectors):
        raise ValueError("labels length must match vectors")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["column_name"] + list(SLOT_NAMES)
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, vec in enumerate(vectors):
            row = [vec.column_name] + [_fmt(x) for x in vec.values]
            if labels is not None:
                row.append(str(labels[i]))
            writer.writerow(row)


def read_matrix_csv(path) -> tuple:
    """Read back a derived-matrix CSV; returns (vectors, labels_or_None)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_labels = header and header[-1] == "label"
        expected = ["column_name"] + list(SLOT_NAMES) + (["label"] if has_labels else [])
        if header != expected:
            raise ValueError(f"{path}: unexpected matrix header")
        vectors, labels = [], [] if has_labels else None
        for row in reader:
            end = -1 if has_labels else len(row)
            values = [float(x) for x in row[1:len(SLOT_NAMES) + 1]]
            vectors.append(MetaFeatureVector(values=values, column_name=row[0]))
            if has_labels:
                labels.append(int(row[-1]))
    return vectors, labels
