"""Tabular data loading, z-score standardization, inductive splits and the
synthetic group-anomaly toy set."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    columns: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or Inf")
        object.__setattr__(self, "features", X)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise DataError(f"labels length {y.shape} does not match N={X.shape[0]}")
            if not np.all((y == 0) | (y == 1)):
                raise DataError("labels must be 0 or 1")
            object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.features[idx], labels, self.name, self.columns)


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"dimension mismatch: data has {X.shape[1]} columns, stats expect {self.mean.shape[0]}"
            )
        return (X - self.mean) / self.std


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at row {row}, column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {text!r} at row {row}, column {column!r}")
    return value


def load_csv(path: str | os.PathLike, label_column: str | None = None) -> Dataset:
    """Read a headered numeric CSV.

    Rows are numbered from 1 for the first data row in error messages. When
    ``label_column`` is given that column is split off as 0/1 labels;
    otherwise every column is a feature.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if label_column is not None and label_column not in header:
            raise DataError(f"label column {label_column!r} not found in header {header}")
        label_pos = header.index(label_column) if label_column is not None else -1
        feature_cols = [c for j, c in enumerate(header) if j != label_pos]

        rows, labels = [], []
        for row_no, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"ragged row {row_no}: expected {len(header)} columns, got {len(raw)}"
                )
            values = []
            for j, cell in enumerate(raw):
                cell = cell.strip()
                if j == label_pos:
                    if cell not in ("0", "1", "0.0", "1.0"):
                        raise DataError(
                            f"label value {cell!r} at row {row_no} is not 0 or 1"
                        )
                    labels.append(int(float(cell)))
                else:
                    values.append(_parse_cell(cell, row_no, header[j]))
            rows.append(values)

    if not rows:
        raise DataError(f"{path} has no data rows")
    X = np.array(rows, dtype=np.float64)
    y = np.array(labels, dtype=np.int64) if label_column is not None else None
    return Dataset(X, y, path.stem, tuple(feature_cols))


def write_csv(ds: Dataset, dest, label_column: str = "label") -> None:
    """Write features (17 significant digits) plus an optional label column
    to a path or an open text file."""
    if not hasattr(dest, "write"):
        with Path(dest).open("w", newline="", encoding="utf-8") as fh:
            return write_csv(ds, fh, label_column)
    columns = list(ds.columns) or [f"x{j + 1}" for j in range(ds.d)]
    header = columns + ([label_column] if ds.labels is not None else [])
    dest.write(",".join(header) + "\n")
    for i in range(ds.n):
        cells = [format(v, ".17g") for v in ds.features[i]]
        if ds.labels is not None:
            cells.append(str(int(ds.labels[i])))
        dest.write(",".join(cells) + "\n")


def fit_standardization(X: np.ndarray) -> StandardizationStats:
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # constant columns (or spreads whose variance underflows) pass through unscaled
    std[(np.ptp(X, axis=0) == 0) | (std == 0)] = 1.0
    return StandardizationStats(mean, std)


def standardize_fit_apply(
    train: Dataset, others: list[Dataset] = ()
) -> tuple[list[Dataset], StandardizationStats]:
    """Fit z-score statistics on ``train`` and apply them to train and ``others``.

    The first returned dataset is the standardized train set.
    """
    stats = fit_standardization(train.features)
    out = []
    for ds in [train, *others]:
        if ds.d != train.d:
            raise DataError(f"dimension mismatch: {ds.name or 'dataset'} has {ds.d} columns, train has {train.d}")
        out.append(Dataset(stats.apply(ds.features), ds.labels, ds.name, ds.columns))
    return out, stats


def _n_train(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction + 1e-9))


def split_inductive(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    rng = np.random.default_rng(spec.seed)
    n_train = _n_train(ds.n, spec.train_fraction)
    if n_train < 1:
        raise DataError(f"train_fraction {spec.train_fraction} leaves an empty train set for N={ds.n}")

    if spec.stratified:
        if ds.labels is None:
            raise DataError("stratified split requested but dataset has no labels")
        pos = np.flatnonzero(ds.labels == 1)
        neg = np.flatnonzero(ds.labels == 0)
        n_pos = min(int(round(pos.size * spec.train_fraction)), pos.size, n_train)
        n_neg = n_train - n_pos
        if n_neg > neg.size:
            n_neg, n_pos = neg.size, n_train - neg.size
        pos, neg = rng.permutation(pos), rng.permutation(neg)
        train_idx = np.concatenate([pos[:n_pos], neg[:n_neg]])
        test_idx = np.concatenate([pos[n_pos:], neg[n_neg:]])
    else:
        perm = rng.permutation(ds.n)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    if test_idx.size == 0:
        raise DataError(f"train_fraction {spec.train_fraction} leaves an empty test set for N={ds.n}")

    train_idx.sort()
    test_idx.sort()
    return ds.subset(train_idx), ds.subset(test_idx)


TOY_NORMAL_CENTERS = ((0.0, 0.0), (10.0, 0.0), (5.0, 9.0))
TOY_NORMAL_STD = 2.0
TOY_ANOMALY_CENTER = (5.0, 4.0)
TOY_ANOMALY_STD = 0.3


def generate_group_anomaly_toy(seed: int = 0) -> Dataset:
    """Three broad Gaussian clusters of 300 points plus one tight group of 30
    anomalies sitting between them (labels 1 for the group)."""
    rng = np.random.default_rng(seed)
    blocks = [rng.normal(c, TOY_NORMAL_STD, size=(300, 2)) for c in TOY_NORMAL_CENTERS]
    blocks.append(rng.normal(TOY_ANOMALY_CENTER, TOY_ANOMALY_STD, size=(30, 2)))
    X = np.vstack(blocks)
    y = np.r_[np.zeros(900, dtype=np.int64), np.ones(30, dtype=np.int64)]
    return Dataset(X, y, f"toy_group_s{seed}", ("x1", "x2"))
