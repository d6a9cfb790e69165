"""Session fixtures: the default synthetic corpus and the expensive artifacts
derived from it (feature matrix, cross-validation result, full model), shared
across test modules so they are computed once.  Build wall times are recorded
so the end-to-end acceptance criterion can enforce its runtime budget no
matter which test triggered the construction.
"""

import time

import numpy as np
import pytest

from phi_sentinel.gbt import train_calibrated
from phi_sentinel.patterns import builtin_library
from phi_sentinel.pipeline import cross_validate, extract_corpus
from phi_sentinel.synthgen import CorpusSpec, generate_corpus

BUILD_TIMES = {}


@pytest.fixture(scope="session")
def build_times():
    return BUILD_TIMES


@pytest.fixture(scope="session")
def library():
    return builtin_library()


@pytest.fixture(scope="session")
def corpus_bundle():
    t0 = time.perf_counter()
    bundle = generate_corpus(CorpusSpec())
    BUILD_TIMES["generate"] = time.perf_counter() - t0
    return bundle


@pytest.fixture(scope="session")
def corpus_data(corpus_bundle, library):
    t0 = time.perf_counter()
    vectors, labels, regex_probs, names = extract_corpus(
        corpus_bundle.datasets, library, k=1000, seed=42, threads=1
    )
    BUILD_TIMES["extract"] = time.perf_counter() - t0
    assert all(lbl is not None for lbl in labels)
    return {
        "vectors": vectors,
        "labels": np.asarray(labels, dtype=np.int64),
        "regex_probs": np.asarray(regex_probs, dtype=np.float64),
        "names": names,
    }


@pytest.fixture(scope="session")
def cv_result(corpus_data):
    t0 = time.perf_counter()
    result = cross_validate(
        corpus_data["vectors"],
        corpus_data["labels"],
        corpus_data["regex_probs"],
        folds=5,
        seed=42,
    )
    BUILD_TIMES["cross_validate"] = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def full_model(corpus_data):
    return train_calibrated(corpus_data["vectors"], corpus_data["labels"], seed=42)
