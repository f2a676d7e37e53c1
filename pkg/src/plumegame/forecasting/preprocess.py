"""Cleaning and normalization of hourly monitoring series.

Faulty cells (blank or negative, both stand for failed measurements) are
filled from neighbouring valid values; series are scaled by their range.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: CSV column order after the leading timestamp.
DATASET_COLUMNS = ("ws", "t", "hu", "rf", "pm10", "sox", "nox", "co", "o3")

CSV_HEADER = ("timestamp",) + DATASET_COLUMNS


def normalize(values) -> np.ndarray:
    """Scale a series by its range: v / (max - min).

    The minimum is deliberately not subtracted; the inverse is a plain
    multiplication by the range.
    """
    arr = np.asarray(values, dtype=float)
    span = float(arr.max() - arr.min())
    if span == 0.0:
        raise ValueError("cannot normalize a constant series (zero range)")
    return arr / span


def denormalize(values, span: float) -> np.ndarray:
    return np.asarray(values, dtype=float) * span


def impute(values, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Fill faulty cells from the nearest valid values on each side.

    A cell is faulty when it is NaN or negative.  Each faulty cell becomes
    the mean of up to ``q`` valid predecessors and up to ``q`` valid
    successors (scanning past other faulty cells).  Returns the filled
    series and a boolean mask of the cells that were imputed.
    """
    if q < 1:
        raise ValueError(f"window size must be >= 1, got {q}")
    arr = np.asarray(values, dtype=float).copy()
    bad = np.isnan(arr) | (arr < 0)
    if bad.all():
        raise ValueError("series has no valid values to impute from")
    good_idx = np.flatnonzero(~bad)
    for i in np.flatnonzero(bad):
        pos = np.searchsorted(good_idx, i)
        before = good_idx[max(0, pos - q):pos]
        after = good_idx[pos:pos + q]
        pool = arr[np.concatenate([before, after])]
        arr[i] = pool.mean()
    return arr, bad


def rmse(predicted, reference) -> float:
    """Root mean squared error between two equal-length vectors."""
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(reference, dtype=float)
    if p.shape != r.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {r.shape}")
    if p.size == 0:
        raise ValueError("vectors must hold at least one element")
    return float(np.sqrt(np.mean((p - r) ** 2)))


@dataclass
class TimeSeriesDataset:
    """Hourly series with no gaps, plus the record of which cells were imputed."""

    timestamps: np.ndarray  # strictly increasing, equally spaced
    columns: dict[str, np.ndarray]  # keys = DATASET_COLUMNS
    imputed: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.timestamps)
        if n >= 2:
            gaps = np.diff(self.timestamps)
            if not (np.all(gaps > 0) and np.allclose(gaps, gaps[0])):
                raise ValueError("timestamps must be strictly increasing and equally spaced")
        missing = [c for c in DATASET_COLUMNS if c not in self.columns]
        if missing:
            raise ValueError(f"dataset missing columns: {', '.join(missing)}")
        for name in DATASET_COLUMNS:
            col = self.columns[name]
            if len(col) != n:
                raise ValueError(f"column {name}: length {len(col)} != {n}")
            if np.isnan(col).any():
                raise ValueError(f"column {name}: gaps remain after imputation")
        if not self.imputed:
            self.imputed = {c: np.zeros(n, dtype=bool) for c in DATASET_COLUMNS}

    def __len__(self) -> int:
        return len(self.timestamps)

    def column_range(self, name: str) -> tuple[float, float]:
        col = self.columns[name]
        return float(col.min()), float(col.max())


def load_dataset_csv(path: str | Path, impute_window: int = 6) -> TimeSeriesDataset:
    """Parse the hourly dataset CSV and impute faulty cells.

    Expected header: ``timestamp,ws,t,hu,rf,pm10,sox,nox,co,o3``.  Empty or
    negative cells count as faulty.  A malformed row raises an error naming
    its line number.
    """
    path = Path(path)
    timestamps: list[float] = []
    raw: dict[str, list[float]] = {c: [] for c in DATASET_COLUMNS}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                timestamps.append(float(row[0]))
                for name, cell in zip(DATASET_COLUMNS, row[1:]):
                    raw[name].append(float(cell) if cell.strip() != "" else np.nan)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable numeric field in {row!r}") from None
    if not timestamps:
        raise ValueError(f"{path}: no data rows")

    columns: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    for name in DATASET_COLUMNS:
        columns[name], masks[name] = impute(np.array(raw[name]), impute_window)
    return TimeSeriesDataset(np.array(timestamps), columns, masks)


def write_dataset_csv(path: str | Path, dataset: TimeSeriesDataset) -> None:
    """Write the dataset in the canonical CSV layout, full float precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(len(dataset)):
            row = [repr(float(dataset.timestamps[i]))]
            row.extend(repr(float(dataset.columns[c][i])) for c in DATASET_COLUMNS)
            writer.writerow(row)
