"""Tabular data container and CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Named columns of equal length.

    Columns are kept as given; numeric conversion happens where a column is
    consumed so that errors can name the offending column and row.
    """

    columns: Mapping[str, np.ndarray]
    rows_read: int | None = None
    dropped: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"columns have unequal lengths: {sorted(lengths)}")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, **kwargs) -> Dataset:
        return cls({str(k): frame[k].to_numpy() for k in frame.columns}, **kwargs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def rows_dropped(self) -> int:
        return sum(self.dropped.values())

    def numeric(self, name: str) -> np.ndarray:
        """Return column ``name`` as float64, rejecting text and missing cells."""
        if name not in self.columns:
            raise DataError(f"unknown column {name!r}")
        raw = self.columns[name]
        try:
            values = np.asarray(raw, dtype=float)
        except (TypeError, ValueError):
            for row, cell in enumerate(raw):
                try:
                    float(cell)
                except (TypeError, ValueError):
                    raise DataError(
                        f"column {name!r} has non-numeric cell {cell!r} at row {row}"
                    ) from None
            raise
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise DataError(f"column {name!r} has a missing value at row {bad[0]}")
        return values

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack numeric columns into an (rows, len(names)) array."""
        if not names:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self.numeric(n) for n in names])


def read_table(
    path: str | Path,
    numeric_columns: Sequence[str],
    protected: str,
    protected_pair: tuple[str, str] | None = None,
) -> Dataset:
    """Load a header-row CSV, keeping ``protected`` and ``numeric_columns``.

    When ``protected_pair`` is given its two labels map to 0 and 1 and any
    other label drops the row. Rows with missing cells are dropped and counted;
    a present but non-numeric cell in a numeric column is an error.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    wanted = [protected] + [c for c in numeric_columns if c != protected]
    try:
        header = pd.read_csv(path, nrows=0).columns
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path} as CSV: {exc}") from exc
    missing = [c for c in wanted if c not in header]
    if missing:
        raise DataError(f"column(s) not found in {path.name}: {', '.join(missing)}")

    dtypes = {protected: str} if protected_pair else None
    frame = pd.read_csv(path, usecols=wanted, dtype=dtypes, skipinitialspace=True)
    rows_read = len(frame)
    keep = np.ones(rows_read, dtype=bool)
    dropped = {"missing": 0, "protected_label": 0}

    columns: dict[str, np.ndarray] = {}
    for name in wanted:
        series = frame[name]
        if name == protected and protected_pair:
            labels = series.str.strip()
            coded = labels.map({protected_pair[0]: 0.0, protected_pair[1]: 1.0})
            absent = series.isna().to_numpy()
            oov = coded.isna().to_numpy() & ~absent
            dropped["missing"] += int(np.count_nonzero(absent & keep))
            dropped["protected_label"] += int(np.count_nonzero(oov & keep))
            keep &= ~(absent | oov)
            columns[name] = coded.to_numpy(dtype=float)
            continue
        values = pd.to_numeric(series, errors="coerce")
        absent = series.isna().to_numpy()
        junk = values.isna().to_numpy() & ~absent
        if junk.any():
            row = int(np.flatnonzero(junk)[0])
            raise DataError(
                f"column {name!r} has non-numeric cell {series.iloc[row]!r} "
                f"at data row {row + 1}"
            )
        dropped["missing"] += int(np.count_nonzero(absent & keep))
        keep &= ~absent
        columns[name] = values.to_numpy(dtype=float)

    if not keep.any():
        raise DataError(f"no rows left in {path.name} after filtering")
    columns = {k: v[keep] for k, v in columns.items()}
    return Dataset(columns, rows_read=rows_read, dropped=dropped)
