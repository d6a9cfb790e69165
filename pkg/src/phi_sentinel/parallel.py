"""Column-parallel feature extraction.

Each column's feature vector is a pure function of its sample, so columns fan
out across worker processes and results are gathered back in column order;
output is byte-identical to the serial path regardless of worker count.  On
fork platforms the samples are inherited through process memory rather than
pickled, keeping the dispatch overhead to index lists.
"""

from __future__ import annotations

import gc
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from .metafeatures import MetaFeatureVector, featurize

__all__ = ["extract_features", "resolve_threads", "THREADS_ENV_VAR"]

THREADS_ENV_VAR = "PHI_SENTINEL_THREADS"

_shared_samples = None


def resolve_threads(requested: Optional[int] = None) -> int:
    """Requested thread count, else the env fallback, else all cores."""
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
    return os.cpu_count() or 1


def _worker_init():
    # Short-lived fork workers: cycle collection only causes copy-on-write
    # traffic against the inherited heap.
    gc.disable()


def _featurize_range(bounds):
    lo, hi = bounds
    return [featurize(_shared_samples[i]).values for i in range(lo, hi)]


def extract_features(samples, threads: int = 1) -> list:
    """Feature vectors for a list of ColumnSamples, in input order."""
    global _shared_samples
    samples = list(samples)
    if threads <= 1 or len(samples) < 2:
        return [featurize(s) for s in samples]
    n = len(samples)
    chunk = max(1, -(-n // (threads * 4)))
    ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    _shared_samples = samples
    gc.freeze()  # keep the inherited heap off the young generations
    try:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx,
                                 initializer=_worker_init) as pool:
            chunks = list(pool.map(_featurize_range, ranges))
    finally:
        gc.unfreeze()
        _shared_samples = None
    out = []
    for (lo, _), values in zip(ranges, chunks):
        for offset, v in enumerate(values):
            out.append(MetaFeatureVector(values=v, column_name=samples[lo + offset].column_name))
    return out
