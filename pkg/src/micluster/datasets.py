"""Dataset containers and file formats.

CSV conventions: a header row, numeric cells, missing values written as an
empty field or ``NA``.  An optional leading non-numeric column is treated
as row identifiers.  Binary columns (observed values within {0, 1}) are
auto-detected unless overridden.

Partitions serialize as a single CSV line of integer labels; matrices as
dense CSV (tests and debugging only).
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .partition import Partition

__all__ = [
    "Dataset",
    "IncompleteDataset",
    "ImputationStack",
    "read_data_csv",
    "read_incomplete_csv",
    "write_data_csv",
    "write_incomplete_csv",
    "read_partition_csv",
    "write_partition_csv",
    "write_matrix_csv",
    "load_animals",
]

CONTINUOUS = "continuous"
BINARY = "binary"


def _detect_column_kinds(values: np.ndarray, mask: np.ndarray | None = None) -> tuple[str, ...]:
    kinds = []
    for j in range(values.shape[1]):
        col = values[:, j]
        if mask is not None:
            col = col[~mask[:, j]]
        kinds.append(BINARY if col.size and np.isin(col, (0.0, 1.0)).all() else CONTINUOUS)
    return tuple(kinds)


def _resolve_kinds(values, mask, column_kind, binary_columns, column_names):
    if column_kind is not None:
        return tuple(column_kind)
    kinds = list(_detect_column_kinds(values, mask))
    if binary_columns is not None:
        names = list(column_names) if column_names else [str(j) for j in range(values.shape[1])]
        for j in range(len(kinds)):
            kinds[j] = BINARY if names[j] in binary_columns else CONTINUOUS
    return tuple(kinds)


@dataclass(frozen=True)
class Dataset:
    """A complete numeric data matrix with per-column kind tags."""

    rows: np.ndarray
    column_kind: tuple[str, ...] = None
    row_ids: tuple[str, ...] = None
    column_names: tuple[str, ...] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError("dataset must be a non-empty 2-d matrix")
        if np.isnan(rows).any():
            raise ValueError("complete dataset may not contain missing entries")
        kinds = self.column_kind
        if kinds is None:
            kinds = _detect_column_kinds(rows)
        kinds = tuple(kinds)
        if len(kinds) != rows.shape[1]:
            raise ValueError("column_kind length must match the number of columns")
        if any(k not in (CONTINUOUS, BINARY) for k in kinds):
            raise ValueError(f"column kinds must be '{CONTINUOUS}' or '{BINARY}'")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "column_kind", kinds)
        object.__setattr__(self, "row_ids", tuple(self.row_ids) if self.row_ids else None)
        object.__setattr__(self, "column_names", tuple(self.column_names) if self.column_names else None)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class IncompleteDataset:
    """A numeric matrix with missing cells; ``mask[i, j]`` is True iff missing."""

    rows: np.ndarray
    mask: np.ndarray
    column_kind: tuple[str, ...] = None
    row_ids: tuple[str, ...] = None
    column_names: tuple[str, ...] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError("dataset must be a non-empty 2-d matrix")
        if mask.shape != rows.shape:
            raise ValueError("mask shape must match the data shape")
        if not np.array_equal(np.isnan(rows), mask):
            raise ValueError("mask must flag exactly the NaN cells")
        if mask.all(axis=0).any():
            raise ValueError("a column is fully missing")
        kinds = self.column_kind
        if kinds is None:
            kinds = _detect_column_kinds(rows, mask)
        kinds = tuple(kinds)
        if len(kinds) != rows.shape[1]:
            raise ValueError("column_kind length must match the number of columns")
        rows = rows.copy()
        rows.flags.writeable = False
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "column_kind", kinds)
        object.__setattr__(self, "row_ids", tuple(self.row_ids) if self.row_ids else None)
        object.__setattr__(self, "column_names", tuple(self.column_names) if self.column_names else None)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    @property
    def n_missing(self) -> int:
        return int(self.mask.sum())

    def complete(self) -> Dataset:
        if self.mask.any():
            raise ValueError("dataset has missing cells")
        return Dataset(self.rows, self.column_kind, self.row_ids, self.column_names)

    @staticmethod
    def from_matrix(rows, column_kind=None, row_ids=None, column_names=None) -> "IncompleteDataset":
        rows = np.asarray(rows, dtype=np.float64)
        return IncompleteDataset(rows, np.isnan(rows), column_kind, row_ids, column_names)


@dataclass(frozen=True)
class ImputationStack:
    """The M completed copies of one incomplete dataset, with provenance."""

    completed: tuple[Dataset, ...]
    imputer_id: str
    source_mask: np.ndarray
    seeds: tuple[int, ...] = field(default=())

    def __post_init__(self):
        completed = tuple(self.completed)
        if len(completed) < 1:
            raise ValueError("a stack holds at least one completed copy")
        mask = np.asarray(self.source_mask, dtype=bool)
        first = completed[0]
        if mask.shape != first.rows.shape:
            raise ValueError("source mask shape must match the data shape")
        observed = ~mask
        for copy in completed[1:]:
            if copy.rows.shape != first.rows.shape:
                raise ValueError("all completed copies must share the data shape")
            if not np.array_equal(copy.rows[observed], first.rows[observed]):
                raise ValueError("observed cells must be identical across all copies")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "completed", completed)
        object.__setattr__(self, "source_mask", mask)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def m(self) -> int:
        return len(self.completed)

    @property
    def n(self) -> int:
        return self.completed[0].n


def as_matrix(data) -> np.ndarray:
    """Unwrap Dataset-like objects to a float ndarray."""
    if isinstance(data, Dataset):
        return data.rows
    if isinstance(data, IncompleteDataset):
        return data.rows
    return np.asarray(data, dtype=np.float64)


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN"):
        return np.nan
    return float(text)


def _read_csv_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header row plus at least one data row")
    header = [c.strip() for c in rows[0]]
    body = rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ValueError(f"{path}: ragged rows (all rows must match the header width)")
    # a leading non-numeric column is treated as row identifiers
    has_ids = False
    for r in body:
        first = r[0].strip()
        if first == "" or first.upper() in ("NA", "NAN"):
            continue
        try:
            float(first)
        except ValueError:
            has_ids = True
        break
    if has_ids:
        row_ids = tuple(r[0].strip() for r in body)
        names = tuple(header[1:])
        cells = [r[1:] for r in body]
    else:
        row_ids = None
        names = tuple(header)
        cells = body
    try:
        values = np.array([[_parse_cell(c) for c in r] for r in cells], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from exc
    return values, row_ids, names


def read_incomplete_csv(path, binary_columns=None) -> IncompleteDataset:
    """Read a CSV that may contain missing cells (empty or NA)."""
    values, row_ids, names = _read_csv_table(path)
    mask = np.isnan(values)
    kinds = _resolve_kinds(values, mask, None, binary_columns, names)
    return IncompleteDataset(values, mask, kinds, row_ids, names)


def read_data_csv(path, binary_columns=None) -> Dataset:
    """Read a complete-data CSV; missing cells are an error."""
    values, row_ids, names = _read_csv_table(path)
    if np.isnan(values).any():
        raise ValueError(f"{path}: contains missing cells; expected complete data")
    kinds = _resolve_kinds(values, None, None, binary_columns, names)
    return Dataset(values, kinds, row_ids, names)


def _format_value(x: float) -> str:
    if np.isnan(x):
        return ""
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _write_table(path, values, row_ids, column_names, mask=None) -> None:
    n, p = values.shape
    names = list(column_names) if column_names else [f"x{j + 1}" for j in range(p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if row_ids:
            writer.writerow(["id"] + names)
        else:
            writer.writerow(names)
        for i in range(n):
            cells = [
                "" if (mask is not None and mask[i, j]) else _format_value(values[i, j])
                for j in range(p)
            ]
            writer.writerow(([row_ids[i]] if row_ids else []) + cells)


def write_data_csv(path, data: Dataset) -> None:
    _write_table(path, data.rows, data.row_ids, data.column_names)


def write_incomplete_csv(path, data: IncompleteDataset) -> None:
    _write_table(path, data.rows, data.row_ids, data.column_names, mask=data.mask)


def write_partition_csv(path, p: Partition) -> None:
    """One-line CSV of integer labels."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(str(int(x)) for x in p.labels) + "\n")


def read_partition_csv(path, k_max=None) -> Partition:
    with open(path, newline="") as fh:
        line = fh.readline().strip()
    if not line:
        raise ValueError(f"{path}: empty partition file")
    labels = np.array([int(x) for x in line.split(",")], dtype=np.int64)
    if k_max is None:
        k_max = int(labels.max()) + 1
    return Partition(labels, k_max)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Dense matrix CSV (tests and debugging only)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        for row in matrix:
            fh.write(",".join(_format_value(x) for x in row) + "\n")


def load_animals() -> IncompleteDataset:
    """The bundled 20-animal binary dataset (5 rows have missing cells)."""
    resource = importlib.resources.files("micluster.data").joinpath("animals.csv")
    with importlib.resources.as_file(resource) as path:
        return read_incomplete_csv(path)
