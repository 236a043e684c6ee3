"""Dataset construction: synthetic two-cluster data, fraud CSV, splits.

Labels are 1 for anomalies and 0 for normal points everywhere.  Training
sets contain normal points only; test sets mix a fixed anomaly fraction in
(count rounded down).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "EmptyFileError",
    "MissingColumnError",
    "NonNumericCellError",
    "SYNTHETIC_CLUSTER_CENTERS",
    "SYNTHETIC_CLUSTER_STD",
    "SYNTHETIC_ANOMALY_BOX",
    "generate_synthetic",
    "load_fraud_csv",
    "make_split",
    "save_dataset",
    "load_dataset",
]

_DATASET_CACHE_VERSION = 1

logger = logging.getLogger(__name__)

# generator constants for the two-cluster synthetic benchmark; echoed into
# run metadata so results stay interpretable
SYNTHETIC_CLUSTER_CENTERS = ((2.0, 2.0), (-2.0, -2.0))
SYNTHETIC_CLUSTER_STD = 0.3 * np.sqrt(2.0)
SYNTHETIC_ANOMALY_BOX = (-4.0, 4.0)

FRAUD_FEATURE_COLUMNS = tuple(f"V{i}" for i in range(1, 29))
FRAUD_HEADER = ("Time", *FRAUD_FEATURE_COLUMNS, "Amount", "Class")


class EmptyFileError(ValueError):
    """The CSV file contains no header row."""


class MissingColumnError(ValueError):
    """A required CSV column is absent (in the header or in a data row)."""


class NonNumericCellError(ValueError):
    """A CSV cell could not be parsed as a number."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str
    seed: int

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise ValueError(
                f"features {features.shape} and labels {labels.shape} are inconsistent"
            )
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 (normal) or 1 (anomaly)")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_points(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_anomalies(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class SplitSpec:
    train_size: int
    test_size: int = 125
    test_anomaly_ratio: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_size < 1 or self.test_size < 1:
            raise ValueError("train_size and test_size must be >= 1")
        if not 0 <= self.test_anomaly_ratio <= 1:
            raise ValueError(f"test_anomaly_ratio must be in [0, 1], got {self.test_anomaly_ratio}")

    @property
    def test_anomaly_count(self) -> int:
        return int(np.floor(self.test_anomaly_ratio * self.test_size))


def _normal_points(count: int, rng: np.random.Generator) -> np.ndarray:
    """Two offset Gaussian clusters, split as evenly as the count allows."""
    first = count // 2
    sizes = (first, count - first)
    parts = [
        center + SYNTHETIC_CLUSTER_STD * rng.standard_normal((size, 2))
        for center, size in zip(SYNTHETIC_CLUSTER_CENTERS, sizes)
    ]
    return np.vstack(parts)


def generate_synthetic(
    n_train: int, test_spec: SplitSpec, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Two-dimensional two-cluster data with box-uniform anomalies.

    The training set holds ``n_train`` normal points; the test set holds
    ``test_spec.test_size`` points of which ``floor(ratio * size)`` are
    anomalies drawn uniformly from the anomaly box.
    """
    if n_train < 1:
        raise ValueError(f"n_train must be >= 1, got {n_train}")
    train_x = _normal_points(n_train, rng)
    train_x = train_x[rng.permutation(n_train)]
    train = Dataset(
        features=train_x,
        labels=np.zeros(n_train, dtype=np.int64),
        name="synthetic",
        seed=test_spec.seed,
    )

    n_anom = test_spec.test_anomaly_count
    n_norm = test_spec.test_size - n_anom
    lo, hi = SYNTHETIC_ANOMALY_BOX
    test_x = np.vstack(
        [_normal_points(n_norm, rng), rng.uniform(lo, hi, size=(n_anom, 2))]
    )
    test_y = np.concatenate(
        [np.zeros(n_norm, dtype=np.int64), np.ones(n_anom, dtype=np.int64)]
    )
    order = rng.permutation(test_spec.test_size)
    test = Dataset(
        features=test_x[order], labels=test_y[order], name="synthetic", seed=test_spec.seed
    )
    return train, test


def load_fraud_csv(path: str | Path) -> Dataset:
    """Parse the credit-card fraud CSV; keeps V1..V28 and the Class label.

    The Time and Amount columns are dropped.  Header and cells are validated
    eagerly: problems raise with the offending row and column named.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        header = [h.strip().strip('"') for h in header]
        missing = [col for col in FRAUD_HEADER if col not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing column(s) {missing}")
        feature_pos = [header.index(col) for col in FRAUD_FEATURE_COLUMNS]
        class_pos = header.index("Class")

        features: list[list[float]] = []
        labels: list[int] = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                raise MissingColumnError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}"
                )
            values = []
            for col, pos in zip(FRAUD_FEATURE_COLUMNS, feature_pos):
                cell = row[pos].strip().strip('"')
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(
                        f"{path}: row {row_num}, column {col}: cannot parse {cell!r}"
                    ) from None
            cell = row[class_pos].strip().strip('"')
            try:
                label = int(float(cell))
            except ValueError:
                raise NonNumericCellError(
                    f"{path}: row {row_num}, column Class: cannot parse {cell!r}"
                ) from None
            features.append(values)
            labels.append(label)

    if not features:
        raise EmptyFileError(f"{path}: no data rows")
    dataset = Dataset(
        features=np.array(features),
        labels=np.array(labels, dtype=np.int64),
        name="fraud",
        seed=0,
    )
    logger.info(
        "loaded %s: %d rows, %d anomalies, %d features",
        path.name,
        dataset.n_points,
        dataset.n_anomalies,
        dataset.n_features,
    )
    return dataset


def save_dataset(path: str | Path, data: Dataset) -> None:
    """Write a dataset to a versioned binary cache (bit-exact round trip)."""
    np.savez(
        path,
        format_version=np.int64(_DATASET_CACHE_VERSION),
        features=data.features,
        labels=data.labels,
        name=np.str_(data.name),
        seed=np.int64(data.seed),
    )


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    with np.load(path) as blob:
        version = int(blob["format_version"])
        if version != _DATASET_CACHE_VERSION:
            raise ValueError(
                f"unsupported dataset cache version {version}, expected {_DATASET_CACHE_VERSION}"
            )
        return Dataset(
            features=np.array(blob["features"]),
            labels=np.array(blob["labels"]),
            name=str(blob["name"]),
            seed=int(blob["seed"]),
        )


def make_split(
    data: Dataset, spec: SplitSpec, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Uniform random split: normal-only training set, mixed test set.

    Test indices are disjoint from training indices; the test set is
    shuffled so anomalies are not grouped.
    """
    normal_idx = np.flatnonzero(data.labels == 0)
    anomaly_idx = np.flatnonzero(data.labels == 1)
    n_anom = spec.test_anomaly_count
    n_norm = spec.test_size - n_anom
    if normal_idx.size < spec.train_size + n_norm:
        raise ValueError(
            f"need {spec.train_size + n_norm} normal points, dataset has {normal_idx.size}"
        )
    if anomaly_idx.size < n_anom:
        raise ValueError(f"need {n_anom} anomalies, dataset has {anomaly_idx.size}")

    normal_pick = rng.choice(normal_idx, size=spec.train_size + n_norm, replace=False)
    train_idx = normal_pick[: spec.train_size]
    test_idx = np.concatenate(
        [normal_pick[spec.train_size :], rng.choice(anomaly_idx, size=n_anom, replace=False)]
    )
    test_idx = test_idx[rng.permutation(test_idx.size)]

    train = Dataset(
        features=data.features[train_idx],
        labels=data.labels[train_idx],
        name=data.name,
        seed=spec.seed,
    )
    test = Dataset(
        features=data.features[test_idx],
        labels=data.labels[test_idx],
        name=data.name,
        seed=spec.seed,
    )
    return train, test
