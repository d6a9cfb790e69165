import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phi_sentinel.ingest import Column, ColumnSample, parse_datetime, sample_column
from phi_sentinel.metafeatures import (
    MISSING,
    SLOT_NAMES,
    compute_metafeatures,
    digit_precision_stats,
    diversity_index,
    flatten,
    gini_impurity,
    histogram,
    read_matrix_csv,
    write_matrix_csv,
)

FREQUENCY_SLOTS = ["categorical", "null_count", "null_ratio", "mode_ratio",
                   "unique_count", "unique_ratio", "max_category_ratio",
                   "min_category_ratio", "gini_impurity", "diversity_index"]


def _sample(values, inferred=None, null_count=0, total=None):
    values = [str(v) for v in values]
    if inferred is None:
        from phi_sentinel.ingest import infer_type

        inferred = infer_type(values)
    return ColumnSample(column_name="c", values=values, inferred_type=inferred,
                        total_cells=total or (len(values) + null_count),
                        null_count=null_count, seed=0)


# ---------------------------------------------------------------------------
# independent brute-force oracles
# ---------------------------------------------------------------------------

def oracle_gini(values):
    n = len(values)
    return 1.0 - sum((c / n) ** 2 for c in Counter(values).values())


def oracle_diversity(values):
    n = len(values)
    if n <= 1:
        return 0.0
    differing = 0
    for i in range(n):
        for j in range(i + 1, n):
            if values[i] != values[j]:
                differing += 1
    return differing / (n * (n - 1) / 2) * 1.0 if False else differing * 2 / (n * (n - 1))


def oracle_median(xs):
    s = sorted(xs)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2


def oracle_mad(xs):
    med = oracle_median(xs)
    return oracle_median([abs(x - med) for x in xs])


def oracle_moments(xs):
    n = len(xs)
    mean = sum(xs) / n
    m2 = sum((x - mean) ** 2 for x in xs) / n
    if m2 == 0:
        return mean, m2, float("nan"), float("nan")
    m3 = sum((x - mean) ** 3 for x in xs) / n
    m4 = sum((x - mean) ** 4 for x in xs) / n
    return mean, m2, m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def oracle_quantile(xs, q):
    s = sorted(xs)
    n = len(s)
    if n == 1:
        return s[0]
    h = (n - 1) * q
    lo = math.floor(h)
    if lo >= n - 1:
        return s[-1]
    return s[lo] + (h - lo) * (s[lo + 1] - s[lo])


def oracle_precision(tokens):
    counts = [sum(ch in "0123456789" for ch in t) for t in tokens]
    n = len(counts)
    mean = sum(counts) / n
    var = sum((c - mean) ** 2 for c in counts) / n
    std = math.sqrt(var)
    return min(counts), max(counts), mean, var, std, 1.96 * std / math.sqrt(n)


def close(a, b, tol=1e-9):
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# hand-checkable examples
# ---------------------------------------------------------------------------

def test_small_int_column():
    mf = compute_metafeatures(_sample([1, 2, 3, 4, 5]))
    assert mf.median == 3 and mf.mad == 1 and mf.mean == 3
    assert mf.num_zeros == 0 and mf.num_negatives == 0
    assert close(mf.gini_impurity, 0.8, 1e-12)
    assert mf.unique_ratio == 1.0
    assert mf.order_asc and not mf.order_desc
    assert mf.variance == pytest.approx(2.0) and mf.stddev == pytest.approx(math.sqrt(2))


def test_mf_column():
    mf = compute_metafeatures(_sample(["M", "F", "M", "M"]))
    assert mf.categorical
    assert mf.unique_count == 2
    assert mf.mode_ratio == 0.75
    assert mf.gini_impurity == pytest.approx(1 - (0.75**2 + 0.25**2))
    assert mf.gini_impurity == pytest.approx(0.375)
    assert math.isnan(mf.mean) and math.isnan(mf.skewness)


def test_diversity_pairs_example():
    assert diversity_index(["a", "a", "b", "b"]) == pytest.approx(2 / 3, abs=1e-12)
    assert diversity_index(["x"] * 10) == 0.0
    assert diversity_index([str(i) for i in range(10)]) == 1.0
    assert diversity_index(["only"]) == 0.0


def test_moment_shapes():
    rng = random.Random(12)
    normal = [rng.gauss(0, 1) for _ in range(1000)]
    mf = compute_metafeatures(_sample([repr(x) for x in normal], inferred="float"))
    assert abs(mf.skewness) < 0.25
    assert abs(mf.kurtosis) < 0.5
    uniform = [rng.uniform(0, 1) for _ in range(1000)]
    mfu = compute_metafeatures(_sample([repr(x) for x in uniform], inferred="float"))
    assert mfu.kurtosis == pytest.approx(-1.2, abs=0.3)


def test_precision_examples():
    assert digit_precision_stats(["123", "456", "789"]) == (3, 3, 3, 0, 0, 0)
    assert digit_precision_stats(["7.5", "12.25"])[2] == 3.0
    mrns = [f"{1000000000 + i}" for i in range(400)]
    p = digit_precision_stats(mrns)
    assert p[3] == 0.0  # uniform digit width: zero variance
    assert all(math.isnan(x) for x in digit_precision_stats([]))


def test_histogram_examples():
    counts, width = histogram([5.0] * 7)
    assert counts == [1.0] + [0.0] * 9 and width == 0.0
    counts, width = histogram([float(i) for i in range(10)])
    assert counts == [0.1] * 10
    rng = random.Random(3)
    draws = [rng.uniform(0, 1) for _ in range(1000)]
    counts, _ = histogram(draws)
    assert sum(counts) == pytest.approx(1.0, abs=1e-12)
    for c in counts:
        assert abs(c - 0.1) < 0.04


def test_datetime_numeric_family():
    values = ["1970-01-01", "1970-01-03", "1970-01-02"]
    mf = compute_metafeatures(_sample(values, inferred="datetime"))
    assert mf.min == 0.0 and mf.max == 2 * 86400.0
    assert mf.median == 86400.0
    assert not mf.order_asc and not mf.order_desc
    # precision on epoch-second digit strings
    assert not math.isnan(mf.precision_mean)


def test_string_column_missing_marked():
    mf = compute_metafeatures(_sample(["alpha", "beta", "gamma"]))
    for name in ("min", "max", "median", "mad", "sum", "mean", "variance",
                 "stddev", "skewness", "kurtosis", "bin_width",
                 "precision_mean", "num_zeros"):
        assert math.isnan(getattr(mf, name)), name
    assert all(math.isnan(h) for h in mf.histogram_counts)


def test_categorical_threshold():
    values = [str(i % 20) for i in range(400)]
    assert compute_metafeatures(_sample(values)).categorical
    values = [str(i % 30) for i in range(400)]  # 30 > max(20, 20)
    assert not compute_metafeatures(_sample(values)).categorical


def test_order_flags():
    assert compute_metafeatures(_sample([1, 1, 2, 3])).order_asc
    assert compute_metafeatures(_sample([3, 2, 2, 1])).order_desc
    both = compute_metafeatures(_sample([7, 7, 7]))
    assert both.order_asc and both.order_desc
    strings = compute_metafeatures(_sample(["a", "b", "c"]))
    assert strings.order_asc and not strings.order_desc


# ---------------------------------------------------------------------------
# oracle sweeps (criterion-4 style, smaller n here; acceptance runs the full)
# ---------------------------------------------------------------------------

def random_numeric_sample(rng):
    n = rng.randint(1, 200)
    kind = rng.randrange(4)
    if kind == 0:
        xs = [rng.gauss(rng.uniform(-5, 5), rng.uniform(0.1, 10)) for _ in range(n)]
    elif kind == 1:
        xs = [float(rng.randint(-20, 20)) for _ in range(n)]
    elif kind == 2:
        xs = [rng.uniform(0, 1) for _ in range(n)]
    else:
        xs = [rng.choice([0.0, 1.0, 2.5]) for _ in range(n)]
    return xs


def test_formula_oracles_random_sweep():
    rng = random.Random(99)
    for trial in range(300):
        xs = random_numeric_sample(rng)
        tokens = [repr(x) for x in xs]
        mf = compute_metafeatures(_sample(tokens, inferred="float"))
        mean, var, skew, kurt = oracle_moments(xs)
        assert close(mf.mean, mean)
        assert close(mf.variance, var)
        assert close(mf.stddev, math.sqrt(var))
        assert close(mf.skewness, skew)
        assert close(mf.kurtosis, kurt)
        assert close(mf.mad, oracle_mad(xs))
        for q, got in zip((0.05, 0.25, 0.75, 0.95), mf.quantiles):
            assert close(got, oracle_quantile(xs, q))
        assert close(mf.gini_impurity, oracle_gini(tokens), 1e-12)
        assert close(mf.diversity_index, oracle_diversity(tokens), 1e-12)
        for got, want in zip(
            (mf.precision_min, mf.precision_max, mf.precision_mean,
             mf.precision_var, mf.precision_std, mf.precision_moe),
            oracle_precision(tokens),
        ):
            assert close(got, want)


def test_variance_stddev_invariant():
    rng = random.Random(5)
    for _ in range(50):
        xs = random_numeric_sample(rng)
        mf = compute_metafeatures(_sample([repr(x) for x in xs], inferred="float"))
        if not math.isnan(mf.variance):
            assert abs(mf.variance - mf.stddev**2) <= 1e-9 * max(1.0, mf.variance)
        assert mf.min <= mf.mean <= mf.max
        for q in mf.quantiles:
            assert mf.min - 1e-12 <= q <= mf.max + 1e-12
        assert mf.mad >= 0 and mf.variance >= 0


# ---------------------------------------------------------------------------
# encoding invariance (criterion-5 core; acceptance runs 500 columns)
# ---------------------------------------------------------------------------

def _frequency_values(vec):
    return tuple(vec.values[SLOT_NAMES.index(slot)] for slot in FREQUENCY_SLOTS)


def recode(values, rng):
    alphabet = sorted(set(values))
    codes = [f"code_{i}" for i in range(len(alphabet))]
    rng.shuffle(codes)
    mapping = dict(zip(alphabet, codes))
    return [mapping[v] for v in values]


def test_encoding_invariance():
    rng = random.Random(7)
    for _ in range(100):
        n = rng.randint(1, 150)
        alphabet = [f"tok{i}" for i in range(rng.randint(1, 12))]
        values = [rng.choice(alphabet) for _ in range(n)]
        nulls = rng.randint(0, 5)
        a = flatten(compute_metafeatures(_sample(values, null_count=nulls)))
        b = flatten(compute_metafeatures(_sample(recode(values, rng), null_count=nulls)))
        assert _frequency_values(a) == _frequency_values(b)


def test_permutation_invariance_except_order():
    rng = random.Random(8)
    values = [repr(rng.gauss(10, 2)) for _ in range(80)]
    shuffled = list(values)
    rng.shuffle(shuffled)
    a = flatten(compute_metafeatures(_sample(values, inferred="float")))
    b = flatten(compute_metafeatures(_sample(shuffled, inferred="float")))
    skip = {SLOT_NAMES.index("order_asc"), SLOT_NAMES.index("order_desc")}
    for i, (x, y) in enumerate(zip(a.values, b.values)):
        if i in skip:
            continue
        assert x == y or (math.isnan(x) and math.isnan(y)), SLOT_NAMES[i]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=60))
def test_gini_diversity_property(tokens):
    assert abs(gini_impurity(tokens) - oracle_gini(tokens)) < 1e-12
    assert abs(diversity_index(tokens) - oracle_diversity(tokens)) < 1e-12
    assert 0 <= gini_impurity(tokens) < 1
    assert 0 <= diversity_index(tokens) <= 1


# ---------------------------------------------------------------------------
# flattening
# ---------------------------------------------------------------------------

def test_flatten_layout():
    mf = compute_metafeatures(_sample([1, 2, 3]))
    v = flatten(mf, "ints")
    assert len(v.values) == 49
    assert v.values[:4] == [1.0, 0.0, 0.0, 0.0]
    assert v.values[SLOT_NAMES.index("unique_count")] == 3.0

    mfs = compute_metafeatures(_sample(["a", "b"]))
    vs = flatten(mfs)
    assert vs.values[:4] == [0.0, 0.0, 1.0, 0.0]
    assert math.isnan(vs.values[SLOT_NAMES.index("skewness")])


def test_flatten_injective_on_distinct_features():
    rng = random.Random(21)
    seen = []
    for i in range(100):
        n = rng.randint(2, 60)
        values = [repr(rng.gauss(i, 1 + i % 7)) for _ in range(n)]
        vec = flatten(compute_metafeatures(_sample(values, inferred="float")))
        key = tuple("nan" if math.isnan(x) else x for x in vec.values)
        seen.append(key)
    assert len(set(seen)) == len(seen)


def test_matrix_csv_round_trip(tmp_path):
    rng = random.Random(2)
    vecs = []
    for name in ("a", "b", "c"):
        values = [repr(rng.gauss(0, 1)) for _ in range(20)]
        vecs.append(flatten(compute_metafeatures(_sample(values, inferred="float")), name))
    vecs.append(flatten(compute_metafeatures(_sample(["x", "y"])), "s"))
    path = tmp_path / "matrix.csv"
    write_matrix_csv(vecs, path, labels=[0, 1, 0, 1])
    back, labels = read_matrix_csv(path)
    assert labels == [0, 1, 0, 1]
    for v, b in zip(vecs, back):
        assert v.column_name == b.column_name
        for x, y in zip(v.values, b.values):
            assert x == y or (math.isnan(x) and math.isnan(y))


def test_slot_names_canonical():
    assert len(SLOT_NAMES) == 49
    assert SLOT_NAMES[0] == "type_int"
    assert SLOT_NAMES[41] == "gini_impurity"
    assert SLOT_NAMES[48] == "precision_moe"
    assert SLOT_NAMES[22] == "hist_0" and SLOT_NAMES[31] == "hist_9"
