"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.
"""

import itertools
import json
import math
import random
import time

import numpy as np
import pytest

from phi_sentinel.explain import Explainer
from phi_sentinel.gbt import (
    GbtModel,
    TrainParams,
    apply_calibration,
    fit_platt,
    load_model,
    model_to_dict,
    predict_margin_batch,
    save_model,
    train,
)
from phi_sentinel.ingest import ColumnSample, EmptySampleError, sample_column
from phi_sentinel.metafeatures import SLOT_NAMES, compute_metafeatures, flatten
from phi_sentinel.metrics import average_precision, roc_auc
from phi_sentinel.parallel import extract_features
from phi_sentinel.pipeline import scan
from phi_sentinel.screening import match_value
from phi_sentinel.synthgen import CorpusSpec, generate_corpus

from pattern_cases import CONFORMANCE
from test_explain import brute_force_shap, ensemble_features
from test_metafeatures import (
    close,
    oracle_diversity,
    oracle_gini,
    oracle_mad,
    oracle_moments,
    oracle_precision,
    oracle_quantile,
)
from test_metrics import pairwise_auroc


def report(number, ok, detail=""):
    line = f"[criterion {number:02d}] {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" - {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1-2: end-to-end reproduction on the default synthetic corpus
# ---------------------------------------------------------------------------

def test_criterion_01_end_to_end(corpus_bundle, cv_result, build_times):
    total = sum(ds.column_count for ds in corpus_bundle.datasets)
    phi = sum(1 for ds in corpus_bundle.datasets for c in ds.columns if c.label == 1)
    auroc, _ = cv_result.summary["ensemble"]["auroc"]
    sens, _ = cv_result.summary["ensemble"]["sensitivity"]
    wall = sum(build_times.values())
    ok = (
        len(corpus_bundle.datasets) == 8
        and total == 889
        and abs(phi / total - 0.075) <= 0.02
        and auroc >= 0.99
        and sens >= 0.99
        and cv_result.threshold == 0.5
        and wall < 300.0
    )
    report(1, ok, f"ensemble AUROC {auroc:.4f}, sensitivity {sens:.4f}, "
                  f"{total} columns / {phi} PHI, pipeline wall {wall:.1f}s")


def test_criterion_02_regex_below_ensemble(cv_result):
    regex_auroc, _ = cv_result.summary["regex"]["auroc"]
    ens_auroc, _ = cv_result.summary["ensemble"]["auroc"]
    regex_sens, _ = cv_result.summary["regex"]["sensitivity"]
    ok = regex_auroc < ens_auroc and regex_sens < 0.9
    report(2, ok, f"regex AUROC {regex_auroc:.4f} < ensemble {ens_auroc:.4f}, "
                  f"regex sensitivity {regex_sens:.4f} < 0.9")


# ---------------------------------------------------------------------------
# 3: metric engine oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_03_metric_oracle():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 501))
        labels = rng.integers(0, 2, n)
        if labels.sum() == 0:
            labels[0] = 1
        if labels.sum() == n:
            labels[0] = 0
        if rng.random() < 0.5:
            scores = rng.choice([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0], n)
        else:
            scores = rng.random(n)
        worst = max(worst, abs(roc_auc(scores, labels) - pairwise_auroc(scores, labels)))
    hand_scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
    hand_labels = [1, 1, 0, 1, 0, 0]
    exact = (roc_auc(hand_scores, hand_labels) == 8 / 9
             and average_precision(hand_scores, hand_labels) == 11 / 12)
    ok = worst <= 1e-12 and exact
    report(3, ok, f"max |AUROC - pairwise oracle| {worst:.2e}; "
                  f"hand case exact: {exact}")


# ---------------------------------------------------------------------------
# 4: formula oracles
# ---------------------------------------------------------------------------

def _random_tokens(rng):
    n = rng.randint(1, 200)
    kind = rng.randrange(5)
    if kind == 0:
        xs = [rng.gauss(rng.uniform(-5, 5), rng.uniform(0.1, 10)) for _ in range(n)]
    elif kind == 1:
        xs = [float(rng.randint(-20, 20)) for _ in range(n)]
    elif kind == 2:
        xs = [rng.uniform(0, 1) for _ in range(n)]
    elif kind == 3:
        xs = [rng.choice([0.0, 1.0, 2.5]) for _ in range(n)]
    else:
        xs = [rng.choice([7.0])] * n  # constant column
    return xs


def test_criterion_04_formula_oracles():
    rng = random.Random(404)
    checked = 0
    for trial in range(1000):
        xs = _random_tokens(rng) if trial > 1 else ([3.25] if trial == 0 else [5.0, 5.0])
        tokens = [repr(x) for x in xs]
        sample = ColumnSample(column_name="c", values=tokens, inferred_type="float",
                              total_cells=len(tokens), null_count=0, seed=0)
        mf = compute_metafeatures(sample)
        mean, var, skew, kurt = oracle_moments(xs)
        assert close(mf.mad, oracle_mad(xs))
        assert close(mf.skewness, skew)
        assert close(mf.kurtosis, kurt)
        for q, got in zip((0.05, 0.25, 0.75, 0.95), mf.quantiles):
            assert close(got, oracle_quantile(xs, q))
        assert close(mf.gini_impurity, oracle_gini(tokens))
        assert close(mf.diversity_index, oracle_diversity(tokens))
        for got, want in zip(
            (mf.precision_min, mf.precision_max, mf.precision_mean,
             mf.precision_var, mf.precision_std, mf.precision_moe),
            oracle_precision(tokens),
        ):
            assert close(got, want)
        checked += 1
    report(4, checked == 1000, f"{checked} random samples (sizes 1-200, incl. "
                               "degenerate) matched brute force within 1e-9")


# ---------------------------------------------------------------------------
# 5: encoding invariance
# ---------------------------------------------------------------------------

def test_criterion_05_encoding_invariance():
    frequency_slots = ["categorical", "null_count", "null_ratio", "mode_ratio",
                       "unique_count", "unique_ratio", "max_category_ratio",
                       "min_category_ratio", "gini_impurity", "diversity_index"]
    idx = [SLOT_NAMES.index(s) for s in frequency_slots]
    rng = random.Random(505)
    for _ in range(500):
        n = rng.randint(1, 150)
        alphabet = [f"v{i}" for i in range(rng.randint(1, 15))]
        values = [rng.choice(alphabet) for _ in range(n)]
        codes = [f"c{i}" for i in range(len(set(values)))]
        rng.shuffle(codes)
        mapping = dict(zip(sorted(set(values)), codes))
        recoded = [mapping[v] for v in values]
        nulls = rng.randint(0, 6)

        def vec(vals):
            s = ColumnSample(column_name="c", values=vals, inferred_type="string",
                             total_cells=len(vals) + nulls, null_count=nulls, seed=0)
            return flatten(compute_metafeatures(s)).values

        a, b = vec(values), vec(recoded)
        assert all(a[i] == b[i] for i in idx)
    report(5, True, "500 random bijective recodings left all frequency-family "
                    "features bit-identical")


# ---------------------------------------------------------------------------
# 6: GBT correctness
# ---------------------------------------------------------------------------

def test_criterion_06_gbt(tmp_path):
    rng = np.random.default_rng(606)
    for _ in range(50):
        n, d = int(rng.integers(30, 120)), int(rng.integers(2, 8))
        X = rng.normal(0, 1, (n, d))
        X[rng.uniform(0, 1, (n, d)) < 0.2] = np.nan
        logit = np.nan_to_num(X[:, 0], nan=0.0) * 2
        y = (rng.uniform(0, 1, n) < 1 / (1 + np.exp(-logit))).astype(int)
        if y.sum() in (0, n):
            y[0] = 1 - y[0]
        model = train(X, y, TrainParams(rounds=25, depth=int(rng.integers(2, 7))))
        for prev, cur in zip(model.training_loss, model.training_loss[1:]):
            assert cur <= prev + 1e-12

    # exact round-trip
    X = rng.normal(0, 1, (100, 5))
    y = (X[:, 0] > 0).astype(int)
    model = train(X, y, TrainParams(rounds=30, depth=4))
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    probe = rng.normal(0, 1, (100, 5))
    round_trip_exact = all(
        predict_margin_batch(model, [r])[0] == predict_margin_batch(loaded, [r])[0]
        for r in probe
    )

    # separable toy
    toy_x = np.concatenate([rng.uniform(-2, -0.1, 50), rng.uniform(0.1, 2, 50)]).reshape(-1, 1)
    toy_y = np.array([0] * 50 + [1] * 50)
    toy = train(toy_x, toy_y, TrainParams())
    toy_acc = float((((predict_margin_batch(toy, toy_x) > 0).astype(int)) == toy_y).mean())

    # determinism: identical serialized models across repeated fits
    a = train(X.copy(), y.copy(), TrainParams(rounds=20, depth=4))
    b = train(X.copy(), y.copy(), TrainParams(rounds=20, depth=4))
    deterministic = json.dumps(model_to_dict(a)) == json.dumps(model_to_dict(b))

    ok = round_trip_exact and toy_acc == 1.0 and deterministic
    report(6, ok, f"50 loss-monotone fits; round-trip exact {round_trip_exact}; "
                  f"toy accuracy {toy_acc}; deterministic {deterministic}")


# ---------------------------------------------------------------------------
# 7: Platt calibration
# ---------------------------------------------------------------------------

def test_criterion_07_platt(cv_result, corpus_data):
    rng = np.random.default_rng(707)
    s = rng.normal(0, 2.0, 2000)
    y = (rng.uniform(0, 1, 2000) < 1 / (1 + np.exp(-s))).astype(int)
    a, b = fit_platt(s, y)
    recovery = abs(a + 1.0) < 0.15 and abs(b) < 0.15

    vectors = corpus_data["vectors"]
    ranking_ok = True
    for model in cv_result.fold_models:
        margins = predict_margin_batch(model, vectors[:200])
        calibrated = apply_calibration(model, margins)
        ranking_ok &= bool(
            (np.argsort(margins, kind="stable") == np.argsort(calibrated, kind="stable")).all()
        )
    ok = recovery and ranking_ok
    report(7, ok, f"recovered (A,B)=({a:.3f},{b:.3f}); calibrated ranking equals "
                  f"raw ranking on every fold batch: {ranking_ok}")


# ---------------------------------------------------------------------------
# 8: Shapley correctness
# ---------------------------------------------------------------------------

def test_criterion_08_shapley(full_model, corpus_data):
    vectors = corpus_data["vectors"]
    X = np.asarray([v.values for v in vectors], dtype=np.float64)
    rng = np.random.default_rng(808)
    bg = X[sorted(rng.choice(X.shape[0], 100, replace=False).tolist())]
    explainer = Explainer(full_model, bg)
    phis = explainer.shap_matrix(X)
    margins = predict_margin_batch(full_model, X)
    local_err = float(np.abs(phis.sum(axis=1) + explainer.phi0 - margins).max())

    # null features attribute exactly zero
    used = set(ensemble_features(full_model))
    unused = [j for j in range(len(SLOT_NAMES)) if j not in used]
    null_ok = all((phis[:, j] == 0.0).all() for j in unused)

    # exhaustive-subset oracle on random small ensembles, d <= 12
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 13))
        n = 50
        Xs = rng.normal(0, 1, (n, d))
        Xs[rng.uniform(0, 1, (n, d)) < 0.15] = np.nan
        ys = ((np.nan_to_num(Xs[:, 0], nan=0)
               + np.nan_to_num(Xs[:, int(rng.integers(1, d))], nan=0)) > 0).astype(int)
        if ys.sum() in (0, n):
            ys[0] = 1 - ys[0]
        small = train(Xs, ys, TrainParams(rounds=int(rng.integers(1, 4)),
                                          depth=int(rng.integers(1, 5))))
        small_bg = Xs[: int(rng.integers(1, 7))]
        got = Explainer(small, small_bg).shap_matrix(Xs[20:22])
        for row_i, row in enumerate(Xs[20:22]):
            want = brute_force_shap(small, row, small_bg)
            worst = max(worst, float(np.abs(got[row_i] - want).max()))

    ok = local_err < 1e-6 and null_ok and worst < 1e-6
    report(8, ok, f"local accuracy max err {local_err:.2e} over {X.shape[0]} columns; "
                  f"oracle max err {worst:.2e}; null features zero: {null_ok}")


# ---------------------------------------------------------------------------
# 9: ensemble dominance
# ---------------------------------------------------------------------------

def test_criterion_09_dominance(corpus_bundle, full_model, library):
    dominated = True
    superset = True
    for i, ds in enumerate(corpus_bundle.datasets):
        verdicts = scan(ds, full_model, library, k=1000, seed=42, threshold=0.5,
                        attribution_top_k=0)
        for v in verdicts:
            comps = [v.prob_regex]
            if v.prob_ml_calibrated is not None:
                comps.append(v.prob_ml_calibrated)
            dominated &= v.prob_final >= max(comps)
            single = (v.prob_regex >= 0.5) or (
                v.prob_ml_calibrated is not None and v.prob_ml_calibrated >= 0.5
            )
            superset &= (not single) or v.predicted == 1
    ok = dominated and superset
    report(9, ok, f"prob_final dominates components: {dominated}; flagged set "
                  f"contains each detector's flagged set: {superset}")


# ---------------------------------------------------------------------------
# 10: throughput smoke test
# ---------------------------------------------------------------------------

def test_criterion_10_throughput():
    bundle = generate_corpus(CorpusSpec(rows=1300, total_columns=904, seed=7))
    samples = []
    i = 0
    for ds in bundle.datasets:
        for col in ds.columns:
            try:
                samples.append(sample_column(col, 1000, 7 + i))
            except EmptySampleError:
                pass
            i += 1
    assert len(samples) >= 900

    def best_of(threads, reps=3):
        best, vecs = math.inf, None
        for _ in range(reps):
            t0 = time.perf_counter()
            vecs = extract_features(samples, threads=threads)
            best = min(best, time.perf_counter() - t0)
        return best, vecs

    t_serial, v1 = best_of(1)
    t_parallel, v4 = best_of(4)
    identical = all(
        a.column_name == b.column_name and repr(a.values) == repr(b.values)
        for a, b in zip(v1, v4)
    )
    ratio = t_parallel / t_serial
    ok = identical and ratio <= 0.6
    report(10, ok, f"{len(samples)} columns x 1000 samples: serial {t_serial:.2f}s, "
                   f"4 workers {t_parallel:.2f}s, ratio {ratio:.3f} "
                   f"(<= 0.6 required); outputs byte-identical: {identical}")


# ---------------------------------------------------------------------------
# 11: pattern conformance
# ---------------------------------------------------------------------------

def test_criterion_11_pattern_conformance(library):
    paper_examples = {
        ("id-digit-run", "(123)456-7890", True),
        ("ssn", "123-45-6789", True),
        ("ssn", "123456789", True),
        ("date-any", "1970-02-31", True),
        ("date-any", "Feb. 1970", True),
    }
    assert {e.id for e in library.entries} == set(CONFORMANCE)
    failures = []
    for entry in library.entries:
        cases = CONFORMANCE[entry.id]
        assert len(cases["positive"]) >= 5 and len(cases["negative"]) >= 5
        for token in cases["positive"]:
            if not match_value(token, entry):
                failures.append((entry.id, token, "expected match"))
        for token in cases["negative"]:
            if match_value(token, entry):
                failures.append((entry.id, token, "expected no match"))
    for entry_id, token, expect in paper_examples:
        if match_value(token, library.entry(entry_id)) != expect:
            failures.append((entry_id, token, "paper example"))
    report(11, not failures, f"{sum(len(c['positive']) + len(c['negative']) for c in CONFORMANCE.values())} "
                             f"table rows checked across {len(library.entries)} entries; "
                             f"failures: {failures or 'none'}")
