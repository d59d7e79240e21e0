"""Shared domain types for the incremental-classification harness.

Everything here is immutable after construction and safe to share across
threads. Arrays are normalized to float64/int64 and marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class StoreError(ValueError):
    """A FeatureStore violates one of its validity rules."""


class EmptyStoreError(StoreError):
    pass


class NonFiniteValueError(StoreError):
    def __init__(self, row: int, col: int):
        super().__init__(f"non-finite feature value at row {row}, column {col}")
        self.row = row
        self.col = col


class LabelOutOfRangeError(StoreError):
    def __init__(self, row: int, label: int, num_classes: int):
        super().__init__(
            f"label {label} at row {row} outside [0, {num_classes})"
        )
        self.row = row
        self.label = label
        self.num_classes = num_classes


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=dtype))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureStore:
    """Labeled matrix of feature vectors; the I/O currency of the harness.

    features: (n, d) embedding coordinates, labels: (n,) dense 0-based class
    ids. num_classes defaults to max(labels)+1 when not given explicitly.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int | None = None
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = _frozen_array(self.features, np.float64)
        labels = _frozen_array(self.labels, np.int64)
        if feats.ndim == 2 and labels.shape != (feats.shape[0],):
            raise StoreError(
                f"labels shape {labels.shape} does not match n={feats.shape[0]}"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.num_classes is None:
            inferred = int(labels.max()) + 1 if labels.size else 0
            object.__setattr__(self, "num_classes", inferred)
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1] if self.features.ndim == 2 else 0

    def rows_of_class(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_id)


def validate_store(store: FeatureStore) -> FeatureStore:
    """Check every FeatureStore invariant; return the store or raise.

    Raises EmptyStoreError, NonFiniteValueError (first offending cell) or
    LabelOutOfRangeError (first offending row).
    """
    if store.features.ndim != 2:
        raise StoreError(f"features must be 2-d, got ndim={store.features.ndim}")
    if store.n < 1 or store.d < 1:
        raise EmptyStoreError(f"store has shape {store.features.shape}")
    if store.labels.shape != (store.n,):
        raise StoreError(
            f"labels shape {store.labels.shape} does not match n={store.n}"
        )
    if not np.all(np.isfinite(store.features)):
        row, col = np.argwhere(~np.isfinite(store.features))[0]
        raise NonFiniteValueError(int(row), int(col))
    bad = np.flatnonzero((store.labels < 0) | (store.labels >= store.num_classes))
    if bad.size:
        row = int(bad[0])
        raise LabelOutOfRangeError(row, int(store.labels[row]), store.num_classes)
    if store.class_names is not None and len(store.class_names) != store.num_classes:
        raise StoreError(
            f"{len(store.class_names)} class names for {store.num_classes} classes"
        )
    return store


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """(A + A^T) / 2 — repairs floating-point asymmetry from accumulation."""
    return (mat + mat.T) / 2.0


@dataclass(frozen=True)
class ClassStats:
    """Per-class sample count, mean vector (prototype) and covariance."""

    class_id: int
    count: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean, np.float64)
        cov = _frozen_array(symmetrize(np.asarray(self.cov, dtype=np.float64)), np.float64)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.shape[0]}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class CalibratedStats:
    """Calibrated mean and covariance for one class.

    For base classes these are definitionally identical to the raw stats.
    """

    class_id: int
    mean_hat: np.ndarray
    cov_hat: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean_hat, np.float64)
        cov = _frozen_array(symmetrize(np.asarray(self.cov_hat, dtype=np.float64)), np.float64)
        object.__setattr__(self, "mean_hat", mean)
        object.__setattr__(self, "cov_hat", cov)


@dataclass(frozen=True)
class Task:
    """One step of the incremental stream: class ids plus row index sets."""

    index: int
    class_ids: tuple[int, ...]
    train_indices: np.ndarray
    test_indices: np.ndarray
    shots: int | None  # None = all available training samples

    def __post_init__(self):
        object.__setattr__(self, "class_ids", tuple(int(c) for c in self.class_ids))
        object.__setattr__(self, "train_indices", _frozen_array(self.train_indices, np.int64))
        object.__setattr__(self, "test_indices", _frozen_array(self.test_indices, np.int64))


@dataclass(frozen=True)
class TaskStream:
    """Ordered partition of classes into a base task and k-shot increments."""

    tasks: tuple[Task, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    def __len__(self) -> int:
        return len(self.tasks)

    def task_class_ids(self) -> list[tuple[int, ...]]:
        return [t.class_ids for t in self.tasks]

    def classes_through(self, t: int) -> list[int]:
        out: list[int] = []
        for task in self.tasks[: t + 1]:
            out.extend(task.class_ids)
        return out


@dataclass(frozen=True)
class TaskMetrics:
    """Evaluation after one task; acc_old / a_hm are undefined at task 0."""

    task_index: int
    acc_overall: float
    acc_new: float
    acc_old: float | None = None
    a_hm: float | None = None


@dataclass(frozen=True)
class EvalReport:
    per_task: tuple[TaskMetrics, ...]
    a_last: float
    a_inc: float

    def __post_init__(self):
        object.__setattr__(self, "per_task", tuple(self.per_task))
