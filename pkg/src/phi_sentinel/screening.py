"""Column screening against the pattern library: per-pattern match fractions
and the max-over-patterns PHI probability for each column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ingest import Column, Dataset, ColumnSample, EmptySampleError, sample_column
from .patterns import PatternEntry, PatternLibrary

__all__ = ["RegexVerdict", "match_value", "screen_column", "screen_dataset"]


@dataclass
class RegexVerdict:
    """Screening outcome for one column.

    An all-null (unclassifiable) column is marked by an empty
    ``per_pattern_fraction`` map with ``prob_phi`` 0 and no best pattern.
    """

    column_name: str
    prob_phi: float
    best_pattern_id: Optional[str]
    per_pattern_fraction: dict = field(default_factory=dict)

    @property
    def unclassifiable(self) -> bool:
        return not self.per_pattern_fraction


def match_value(value: str, entry: PatternEntry) -> bool:
    """Match one non-null token: full-token, substring, or whole-word keyword."""
    return entry.matches(value)


def screen_column(sample: ColumnSample, library: PatternLibrary) -> RegexVerdict:
    """Fraction of sampled values matching each entry; prob_phi is the max.

    Order of sample values is irrelevant; ties on the max go to the earlier
    library entry.
    """
    if not sample.values:
        raise EmptySampleError(sample.column_name)
    k = len(sample.values)
    fractions = {}
    best_id = None
    best = 0.0
    for entry in library.entries:
        hits = sum(1 for v in sample.values if entry.matches(v))
        frac = hits / k
        fractions[entry.id] = frac
        if frac > best:
            best = frac
            best_id = entry.id
    return RegexVerdict(
        column_name=sample.column_name,
        prob_phi=best,
        best_pattern_id=best_id,
        per_pattern_fraction=fractions,
    )


def _column_seed(seed: int, index: int) -> int:
    # Per-column seeds for dataset-level operations: stable under column count.
    return seed + index


def screen_dataset(dataset: Dataset, library: PatternLibrary, k: int, seed: int) -> list:
    """Screen every column; output order equals column order.

    All-null columns yield an unclassifiable marker verdict instead of
    aborting the scan.
    """
    verdicts = []
    for i, column in enumerate(dataset.columns):
        try:
            sample = sample_column(column, k, _column_seed(seed, i))
        except EmptySampleError:
            verdicts.append(
                RegexVerdict(column_name=column.name, prob_phi=0.0,
                             best_pattern_id=None, per_pattern_fraction={})
            )
            continue
        verdicts.append(screen_column(sample, library))
    return verdicts
