"""CSV ingestion and serialization for microdata.

Headered, comma-separated, UTF-8, '.' decimal point.  Rows with unparseable
required fields are rejected (never imputed) with their row numbers; floats
are written with 17 significant digits so a write/load round trip is exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .exceptions import DataError

__all__ = ["CsvSchema", "load_csv", "save_dataset_csv", "default_schema"]


@dataclass(frozen=True)
class CsvSchema:
    outcome_column: str
    selection_column: str
    x_columns: tuple
    z_columns: tuple
    group_column: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_columns", tuple(self.x_columns))
        object.__setattr__(self, "z_columns", tuple(self.z_columns))
        names = self.required_columns()
        if self.group_column:
            names = names + (self.group_column,)
        if len(set(names)) != len(names):
            raise DataError("duplicate column in schema")
        if not self.x_columns or not self.z_columns:
            raise DataError("schema needs at least one X and one Z column")

    def required_columns(self) -> tuple:
        return (self.selection_column, self.outcome_column) + self.x_columns + self.z_columns


def default_schema(k: int, l: int, group: bool = False) -> CsvSchema:
    return CsvSchema(
        outcome_column="y",
        selection_column="d",
        x_columns=tuple(f"x{i+1}" for i in range(k)),
        z_columns=tuple(f"z{i+1}" for i in range(l)),
        group_column="group" if group else None,
    )


def load_csv(path: str | Path, schema: CsvSchema):
    """Read a Dataset (or a pair, when the schema names a group column).

    Observed outcomes are kept as-is even where d = 0; estimators mask
    through d.  Raises DataError naming the offending column or rows.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError("empty file")
        for col in schema.required_columns() + ((schema.group_column,) if schema.group_column else ()):
            if col not in reader.fieldnames:
                raise DataError(f"missing column: {col}")
        rows = list(reader)
    if not rows:
        raise DataError("empty file")

    bad: list[str] = []
    d, y, X, Z, groups = [], [], [], [], []
    for i, row in enumerate(rows, start=1):
        try:
            dval = float(row[schema.selection_column])
        except (TypeError, ValueError):
            bad.append(f"unparseable selection value at row {i}")
            continue
        if dval not in (0.0, 1.0):
            bad.append(f"non-binary selection value at row {i}")
            continue
        try:
            yval = float(row[schema.outcome_column])
            xvals = [float(row[c]) for c in schema.x_columns]
            zvals = [float(row[c]) for c in schema.z_columns]
        except (TypeError, ValueError):
            bad.append(f"unparseable value at row {i}")
            continue
        d.append(dval)
        y.append(yval)
        X.append(xvals)
        Z.append(zvals)
        if schema.group_column:
            groups.append(row[schema.group_column])
    if bad:
        shown = bad[:10]
        if len(bad) > len(shown):
            shown.append(f"... and {len(bad) - len(shown)} more rows")
        raise DataError("; ".join(shown))

    d = np.asarray(d)
    y = np.asarray(y)
    X = np.asarray(X)
    Z = np.asarray(Z)
    if schema.group_column is None:
        return Dataset(d=d, y=y, X=X, Z=Z)
    labels = sorted(set(groups))
    if len(labels) != 2:
        raise DataError(f"group column must take exactly 2 values, found {len(labels)}")
    groups = np.asarray(groups)
    parts = []
    for lab in labels:
        m = groups == lab
        parts.append(Dataset(d=d[m], y=y[m], X=X[m], Z=Z[m]))
    return tuple(parts)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dataset_csv(path: str | Path, data: Dataset, schema: CsvSchema | None = None) -> None:
    schema = schema or default_schema(data.k, data.l)
    if len(schema.x_columns) != data.k or len(schema.z_columns) != data.l:
        raise DataError("schema does not match dataset dimensions")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.required_columns())
        for i in range(data.n):
            row = [_fmt(data.d[i]), _fmt(data.y[i])]
            row += [_fmt(v) for v in data.X[i]]
            row += [_fmt(v) for v in data.Z[i]]
            writer.writerow(row)
