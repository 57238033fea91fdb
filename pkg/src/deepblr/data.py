"""Dataset ingestion, splitting and normalization.

CSV files are comma-delimited with one header row and purely numeric
cells; anything else is rejected with the offending row and column named.
Normalization statistics always come from the training slice alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("features and targets must be 2-D")
        if self.features.shape[0] != self.targets.shape[0]:
            raise ValueError("feature and target row counts differ")
        if not (np.all(np.isfinite(self.features))
                and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class NormalizationStats:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_means: np.ndarray
    target_stds: np.ndarray


def _diagnose_bad_cell(frame: pd.DataFrame, path) -> None:
    """Name the first unparseable or missing cell; row numbers are 1-based
    data rows (the header is row 0)."""
    for column in frame.columns:
        converted = pd.to_numeric(frame[column], errors="coerce")
        bad = converted.isna() & frame[column].notna()
        if bad.any():
            row = int(np.argmax(bad.to_numpy())) + 1
            raise ValueError(f"{path}: non-numeric value "
                             f"{frame[column].iloc[row - 1]!r} at row {row}, "
                             f"column {column!r}")
        if converted.isna().any():
            row = int(np.argmax(converted.isna().to_numpy())) + 1
            raise ValueError(f"{path}: missing value at row {row}, "
                             f"column {column!r}")


def load_csv(path, target_columns, name: str | None = None) -> Dataset:
    """Read a headered numeric CSV; non-target columns become features.

    target_columns is a column name or list of names; feature order
    follows the file.
    """
    path = Path(path)
    if isinstance(target_columns, str):
        target_columns = [target_columns]
    target_columns = list(target_columns)
    if not target_columns:
        raise ValueError("need at least one target column")

    frame = pd.read_csv(path, header=0)
    if frame.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    missing = [c for c in target_columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: target column(s) {missing} not in header "
                         f"{list(frame.columns)}")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        _diagnose_bad_cell(frame, path)
    feature_names = [c for c in frame.columns if c not in target_columns]
    if not feature_names:
        raise ValueError(f"{path}: every column is a target; no features left")
    return Dataset(name=name or path.stem,
                   features=numeric[feature_names].to_numpy(dtype=np.float64),
                   targets=numeric[target_columns].to_numpy(dtype=np.float64),
                   feature_names=tuple(feature_names),
                   target_names=tuple(target_columns))


def split_dataset(dataset: Dataset, split_index: int, base_seed: int,
                  test_fraction: float = 0.1):
    """Seeded 90/10 row split; seed is base_seed + split_index.

    The permutation's first ceil((1-test_fraction)*N) rows form the
    training set.
    """
    if split_index < 0:
        raise ValueError("split_index must be >= 0")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = dataset.n_rows
    rng = np.random.default_rng(base_seed + split_index)
    perm = rng.permutation(n)
    n_train = int(math.ceil((1.0 - test_fraction) * n))
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    def subset(idx):
        return Dataset(name=dataset.name,
                       features=dataset.features[idx],
                       targets=dataset.targets[idx],
                       feature_names=dataset.feature_names,
                       target_names=dataset.target_names)

    return subset(train_idx), subset(test_idx)


def _column_stats(matrix: np.ndarray, what: str):
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    # max-min catches constant columns whose mean picked up rounding noise
    constant = np.ptp(matrix, axis=0) == 0.0
    if np.any(constant):
        warnings.warn(f"constant {what} column(s) at index "
                      f"{np.flatnonzero(constant).tolist()}; using std 1",
                      stacklevel=3)
        stds = np.where(constant, 1.0, stds)
        means = np.where(constant, matrix[0], means)
    return means, stds


def normalize(train: Dataset, test: Dataset):
    """Zero-mean/unit-variance both sets using training statistics only."""
    if train.n_rows == 0:
        raise ValueError("training split is empty")
    f_mean, f_std = _column_stats(train.features, "feature")
    t_mean, t_std = _column_stats(train.targets, "target")
    stats = NormalizationStats(f_mean, f_std, t_mean, t_std)

    def transform(ds):
        return Dataset(name=ds.name,
                       features=(ds.features - f_mean) / f_std,
                       targets=(ds.targets - t_mean) / t_std,
                       feature_names=ds.feature_names,
                       target_names=ds.target_names)

    return transform(train), transform(test), stats


def normalize_features(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - stats.feature_means) / stats.feature_stds


def denormalize_targets(y: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return np.asarray(y, dtype=np.float64) * stats.target_stds + stats.target_means


def denormalized_nll(nll_normalized, target_stds) -> float:
    """Change of variables y_orig = std * y_norm + mean adds sum(ln std)."""
    stds = np.asarray(target_stds, dtype=np.float64)
    if np.any(stds <= 0):
        raise ValueError("target stds must be positive")
    return float(nll_normalized + np.log(stds).sum())
