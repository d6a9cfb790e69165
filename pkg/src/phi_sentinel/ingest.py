"""Loading of delimited tabular files, column type inference, and reproducible
sampling of non-null values.

Every downstream detector works on a ``ColumnSample``: a seeded random draw of
a column's non-null raw tokens, kept in original row order.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

__all__ = [
    "Dataset",
    "Column",
    "ColumnSample",
    "DatasetParseError",
    "EmptyDatasetError",
    "EmptySampleError",
    "DEFAULT_NULL_TOKENS",
    "DATETIME_LAYOUTS",
    "load_dataset",
    "save_dataset",
    "load_label_sidecar",
    "save_label_sidecar",
    "apply_labels",
    "infer_type",
    "sample_column",
    "parse_number",
    "parse_datetime",
]


class DatasetParseError(ValueError):
    """Raised when a delimited file is not a rectangular table."""


class EmptyDatasetError(ValueError):
    """Raised when a file contains no rows at all."""


class EmptySampleError(ValueError):
    """Raised when a column has no non-null cells to sample from."""


# Tokens treated as null cells on load (case-insensitive).
DEFAULT_NULL_TOKENS = ("", "na", "null", "nan")


@dataclass
class Column:
    """One column of a dataset: raw text cells with None for nulls."""

    name: str
    cells: list
    label: Optional[int] = None
    category: Optional[str] = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.category is not None and self.label != 1:
            raise ValueError("a PHI category tag implies label=1")


@dataclass
class Dataset:
    name: str
    columns: list
    row_count: int
    column_count: int

    @classmethod
    def build(cls, name: str, columns: Sequence[Column]) -> "Dataset":
        columns = list(columns)
        rows = len(columns[0].cells) if columns else 0
        for col in columns:
            if len(col.cells) != rows:
                raise DatasetParseError(
                    f"column {col.name!r} has {len(col.cells)} cells, expected {rows}"
                )
        return cls(name=name, columns=columns, row_count=rows, column_count=len(columns))

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)


@dataclass
class ColumnSample:
    """A seeded draw of non-null tokens from one column, in row order."""

    column_name: str
    values: list
    inferred_type: str
    total_cells: int
    null_count: int
    seed: int

    def __post_init__(self):
        if not self.values:
            raise EmptySampleError(self.column_name)

    @property
    def size(self) -> int:
        return len(self.values)


def load_dataset(path, delimiter: str = ",", has_header: bool = True,
                 null_tokens=DEFAULT_NULL_TOKENS, name: Optional[str] = None) -> Dataset:
    """Read an RFC-4180-style delimited UTF-8 file into a Dataset.

    Null tokens (compared case-insensitively) become None cells.  A ragged row
    raises DatasetParseError naming the offending physical line; a file with
    no rows at all raises EmptyDatasetError.
    """
    nulls = {t.lower() for t in null_tokens}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = []
        header = None
        width = None
        for row in reader:
            if header is None and width is None:
                if has_header:
                    header = row
                    width = len(row)
                    continue
                width = len(row)
            if len(row) != width:
                raise DatasetParseError(
                    f"{path}: line {reader.line_num}: expected {width} fields, got {len(row)}"
                )
            rows.append(row)
    if width is None:
        raise EmptyDatasetError(f"{path}: file is empty")
    if header is None:
        header = [f"col_{i}" for i in range(width)]
    columns = []
    for j, col_name in enumerate(header):
        cells = [None if row[j].lower() in nulls else row[j] for row in rows]
        columns.append(Column(name=col_name, cells=cells))
    return Dataset.build(name or str(path), columns)


def save_dataset(dataset: Dataset, path, delimiter: str = ",") -> None:
    """Write a Dataset back to delimited text; null cells become empty fields."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([c.name for c in dataset.columns])
        for i in range(dataset.row_count):
            writer.writerow(
                ["" if c.cells[i] is None else c.cells[i] for c in dataset.columns]
            )


def load_label_sidecar(path) -> list:
    """Read a label sidecar: ``column_name,label[,category]`` rows.

    A header row is detected by its label field not parsing as an integer.
    Returns (column_name, label, category_or_None) triples.
    """
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if len(row) not in (2, 3):
                raise DatasetParseError(f"{path}: sidecar rows need 2 or 3 fields, got {len(row)}")
            try:
                label = int(row[1])
            except ValueError:
                continue  # header row
            category = row[2] if len(row) == 3 and row[2] != "" else None
            out.append((row[0], label, category))
    return out


def save_label_sidecar(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column_name", "label", "category"])
        for name, label, category in rows:
            writer.writerow([name, label, "" if category is None else category])


def apply_labels(dataset: Dataset, sidecar_rows) -> Dataset:
    """Attach sidecar labels/categories to matching columns in place."""
    by_name = {c.name: c for c in dataset.columns}
    for name, label, category in sidecar_rows:
        if name not in by_name:
            raise KeyError(f"sidecar names unknown column {name!r}")
        col = by_name[name]
        col.label = label
        col.category = category
        if category is not None and label != 1:
            raise ValueError(f"column {name!r}: category implies label=1")
    return dataset


# ---------------------------------------------------------------------------
# Type inference
# ---------------------------------------------------------------------------

_INT_RE = re.compile(r"[+-]?\d+")
_NONFINITE = {"inf", "+inf", "-inf", "infinity", "+infinity", "-infinity", "nan", "+nan", "-nan"}

_MONTHS = r"(?:Jan(?:uary)?|Feb(?:ruary)?|Mar(?:ch)?|Apr(?:il)?|May|Jun(?:e)?|Jul(?:y)?|Aug(?:ust)?|Sep(?:tember)?|Oct(?:ober)?|Nov(?:ember)?|Dec(?:ember)?)"
_MM = r"(?:0?[1-9]|1[0-2])"
_DD = r"(?:0?[1-9]|[12]\d|3[01])"

# Accepted datetime layouts, tried in order.  Day-of-month is range-checked
# only to 1-31: EHR exports contain calendar-invalid dates (a Feb 31) and the
# token is still a date for detection purposes.
DATETIME_LAYOUTS = [
    ("iso_dash", rf"(?P<y>\d{{4}})-(?P<m>{_MM})-(?P<d>{_DD})"),
    ("iso_slash", rf"(?P<y>\d{{4}})/(?P<m>{_MM})/(?P<d>{_DD})"),
    ("mdy_slash", rf"(?P<m>{_MM})/(?P<d>{_DD})/(?P<y>\d{{4}})"),
    ("dmy_slash", rf"(?P<d>{_DD})/(?P<m>{_MM})/(?P<y>\d{{4}})"),
    ("mdy_slash_2y", rf"(?P<m>{_MM})/(?P<d>{_DD})/(?P<y2>\d{{2}})"),
    ("mdy_dash", rf"(?P<m>{_MM})-(?P<d>{_DD})-(?P<y>\d{{4}})"),
    (
        "iso_datetime",
        rf"(?P<y>\d{{4}})-(?P<m>{_MM})-(?P<d>{_DD}) (?P<hh>\d{{2}}):(?P<mi>\d{{2}}):(?P<ss>\d{{2}})",
    ),
    ("month_dd_yyyy", rf"(?P<mn>{_MONTHS})\.? (?P<d>{_DD}),? (?P<y>\d{{4}})"),
    ("month_yyyy", rf"(?P<mn>{_MONTHS})\.? (?P<y>\d{{4}})"),
    ("mm_yyyy", rf"(?P<m>{_MM})/(?P<y>\d{{4}})"),
]

_LAYOUT_RES = [(name, re.compile(src, re.IGNORECASE)) for name, src in DATETIME_LAYOUTS]

_MONTH_INDEX = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}


def _days_from_civil(y: int, m: int, d: int) -> int:
    # Days since 1970-01-01; tolerates day overflow (Feb 31 -> early March).
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def parse_datetime(token: str):
    """Parse a token against the accepted layouts; return epoch seconds or None.

    Two-digit years pivot at 70 (>=70 -> 19xx, else 20xx).
    """
    token = token.strip()
    for _, rx in _LAYOUT_RES:
        m = rx.fullmatch(token)
        if m is None:
            continue
        parts = m.groupdict()
        if parts.get("y") is not None:
            year = int(parts["y"])
        else:
            y2 = int(parts["y2"])
            year = 1900 + y2 if y2 >= 70 else 2000 + y2
        if parts.get("mn") is not None:
            month = _MONTH_INDEX[parts["mn"][:3].lower()]
        else:
            month = int(parts.get("m") or 1)
        day = int(parts.get("d") or 1)
        secs = 0
        if parts.get("hh") is not None:
            secs = int(parts["hh"]) * 3600 + int(parts["mi"]) * 60 + int(parts["ss"])
        return float(_days_from_civil(year, month, day) * 86400 + secs)
    return None


def _parses_int(token: str) -> bool:
    return _INT_RE.fullmatch(token.strip()) is not None


def parse_number(token: str):
    """Return the token's numeric value, or None if it is not a plain numeric."""
    t = token.strip()
    if not t or "_" in t or t.lower() in _NONFINITE:
        return None
    try:
        return float(t)
    except ValueError:
        return None


def infer_type(values: Sequence[str]) -> str:
    """Classify a list of non-null tokens as int, float, datetime, or string.

    A type wins if at least 95% of tokens parse under it; the slack absorbs
    stray sentinel tokens common in EHR exports.  Order-independent.
    """
    if not values:
        raise ValueError("infer_type needs at least one value")
    n = len(values)
    n_int = sum(1 for v in values if _parses_int(v))
    if n_int / n >= 0.95:
        return "int"
    n_num = sum(1 for v in values if parse_number(v) is not None)
    if n_num / n >= 0.95:
        return "float"
    n_dt = sum(1 for v in values if parse_datetime(v) is not None)
    if n_dt / n >= 0.95:
        return "datetime"
    return "string"


def sample_column(column: Column, k: int, seed: int) -> ColumnSample:
    """Draw min(k, #non-null) cells uniformly without replacement.

    The draw is deterministic for a fixed (column, k, seed) and the selected
    values are returned in their original row order, so order-sensitive
    features see the file's ordering.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    nonnull_idx = [i for i, v in enumerate(column.cells) if v is not None]
    if not nonnull_idx:
        raise EmptySampleError(f"column {column.name!r} has no non-null cells")
    if k >= len(nonnull_idx):
        chosen = nonnull_idx
    else:
        rng = random.Random(seed)
        chosen = sorted(rng.sample(nonnull_idx, k))
    values = [column.cells[i] for i in chosen]
    return ColumnSample(
        column_name=column.name,
        values=values,
        inferred_type=infer_type(values),
        total_cells=len(column.cells),
        null_count=len(column.cells) - len(nonnull_idx),
        seed=seed,
    )
