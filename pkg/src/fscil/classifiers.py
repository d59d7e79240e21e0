"""Incremental classifier suite: nearest-mean, calibrated-prototype,
Mahalanobis, and calibrated-Mahalanobis classifiers behind one
fit_base / fit_increment / predict interface.

The backbone is frozen after the base task: fitting an increment never
touches previously stored statistics, and ties always break to the lowest
class id.
"""

from __future__ import annotations

import numpy as np

from .calibration import CalibrationConfig, calibrate_all, calibration_weights, calibrate_prototype
from .numerics import (
    correlation_normalize,
    estimate_stats,
    invert_spd,
    mahalanobis_sq_batch,
    shrink,
)
from .types import CalibratedStats, ClassStats

DEFAULT_GAMMA = 100.0


class NoClassesSeenError(ValueError):
    pass


class BaseNotFittedError(ValueError):
    pass


def split_by_class(features: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    """Rows grouped per class id, keyed in ascending class order."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    return {
        int(c): features[labels == c]
        for c in np.unique(labels)
    }


def ncm_predict(prototypes: dict[int, np.ndarray], batch: np.ndarray) -> np.ndarray:
    """Nearest prototype by squared Euclidean distance; ties -> lowest id."""
    if not prototypes:
        raise NoClassesSeenError("no prototypes fitted")
    batch = np.asarray(batch, dtype=np.float64)
    ids = sorted(prototypes)
    protos = np.stack([prototypes[c] for c in ids])
    # ||x - p||^2 per (row, class); argmin picks the first (lowest id) on ties
    d2 = ((batch[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)
    return np.asarray(ids, dtype=np.int64)[np.argmin(d2, axis=1)]


def predict_mahalanobis(
    means: dict[int, np.ndarray],
    precisions: dict[int, np.ndarray],
    batch: np.ndarray,
) -> np.ndarray:
    """Argmin of per-class squared Mahalanobis distance; ties -> lowest id."""
    if not means:
        raise NoClassesSeenError("no classes fitted")
    batch = np.asarray(batch, dtype=np.float64)
    ids = sorted(means)
    dists = np.stack([mahalanobis_sq_batch(batch, means[c], precisions[c]) for c in ids], axis=1)
    return np.asarray(ids, dtype=np.int64)[np.argmin(dists, axis=1)]


class IncrementalClassifier:
    """Behavioral interface shared by every method in the suite."""

    def fit_base(self, features: np.ndarray, labels: np.ndarray) -> None:
        raise NotImplementedError

    def fit_increment(self, features: np.ndarray, labels: np.ndarray) -> None:
        raise NotImplementedError

    def predict(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def seen_classes(self) -> set[int]:
        raise NotImplementedError


class NearestMeanClassifier(IncrementalClassifier):
    """Per-class mean prototypes, squared-Euclidean nearest-mean prediction."""

    def __init__(self):
        self._prototypes: dict[int, np.ndarray] = {}
        self._base_fitted = False

    def _store_means(self, features, labels) -> None:
        for class_id, rows in split_by_class(features, labels).items():
            self._prototypes[class_id] = estimate_stats(rows, class_id).mean

    def fit_base(self, features, labels) -> None:
        self._store_means(features, labels)
        self._base_fitted = True

    def fit_increment(self, features, labels) -> None:
        self._store_means(features, labels)

    def predict(self, batch) -> np.ndarray:
        return ncm_predict(self._prototypes, batch)

    def seen_classes(self) -> set[int]:
        return set(self._prototypes)


class CalibratedPrototypeClassifier(NearestMeanClassifier):
    """Nearest-mean with incremental prototypes fused toward similar base
    prototypes; base prototypes are left untouched."""

    def __init__(self, cfg: CalibrationConfig | None = None):
        super().__init__()
        self.cfg = cfg or CalibrationConfig()
        self._base_means: list[np.ndarray] = []

    def fit_base(self, features, labels) -> None:
        super().fit_base(features, labels)
        self._base_means = [self._prototypes[c] for c in sorted(self._prototypes)]

    def fit_increment(self, features, labels) -> None:
        if not self._base_fitted:
            raise BaseNotFittedError("fit_base must run before fit_increment")
        for class_id, rows in split_by_class(features, labels).items():
            mu_raw = estimate_stats(rows, class_id).mean
            w = calibration_weights(self._base_means, mu_raw, self.cfg.tau)
            self._prototypes[class_id] = calibrate_prototype(
                mu_raw, self._base_means, w, self.cfg.alpha
            )


def shrunk_correlation_precision(cov: np.ndarray, gamma: float) -> np.ndarray:
    """Precision of the correlation-normalized, gamma-shrunk covariance.

    Order of operations: shrink first, then correlation-normalize, then
    invert.
    """
    return invert_spd(correlation_normalize(shrink(cov, gamma)))


class MahalanobisClassifier(IncrementalClassifier):
    """Per-class Mahalanobis metric from shrunk, correlation-normalized
    covariances. Few-shot covariances are estimated from the shots directly,
    which is exactly the failure mode calibration exists to fix."""

    def __init__(self, gamma: float = DEFAULT_GAMMA):
        self.gamma = gamma
        self._stats: dict[int, ClassStats] = {}
        self._means: dict[int, np.ndarray] = {}
        self._precisions: dict[int, np.ndarray] = {}
        self._base_ids: set[int] = set()
        self._base_fitted = False

    def _fit_classes(self, features, labels) -> list[int]:
        fitted = []
        for class_id, rows in split_by_class(features, labels).items():
            stats = estimate_stats(rows, class_id)
            self._stats[class_id] = stats
            self._means[class_id] = stats.mean
            self._precisions[class_id] = shrunk_correlation_precision(stats.cov, self.gamma)
            fitted.append(class_id)
        return fitted

    def fit_base(self, features, labels) -> None:
        self._base_ids = set(self._fit_classes(features, labels))
        self._base_fitted = True

    def fit_increment(self, features, labels) -> None:
        self._fit_classes(features, labels)

    def predict(self, batch) -> np.ndarray:
        return predict_mahalanobis(self._means, self._precisions, batch)

    def decision_distances(self, batch) -> tuple[list[int], np.ndarray]:
        """Sorted class ids plus the (n, classes) distance matrix."""
        ids = sorted(self._means)
        batch = np.asarray(batch, dtype=np.float64)
        dists = np.stack(
            [mahalanobis_sq_batch(batch, self._means[c], self._precisions[c]) for c in ids],
            axis=1,
        )
        return ids, dists

    def seen_classes(self) -> set[int]:
        return set(self._means)


class CalibratedMahalanobisClassifier(MahalanobisClassifier):
    """Mahalanobis classifier whose incremental classes get calibrated means
    and covariances before the shrink -> normalize -> invert pipeline. Base
    classes keep their raw many-shot statistics."""

    def __init__(self, cfg: CalibrationConfig | None = None, gamma: float = DEFAULT_GAMMA):
        super().__init__(gamma=gamma)
        self.cfg = cfg or CalibrationConfig(beta=1.0)

    def fit_increment(self, features, labels) -> None:
        if not self._base_fitted:
            raise BaseNotFittedError("fit_base must run before fit_increment")
        raw = [
            estimate_stats(rows, class_id)
            for class_id, rows in split_by_class(features, labels).items()
        ]
        base = [self._stats[c] for c in sorted(self._base_ids)]
        for cal in calibrate_all(raw, base, self.cfg):
            self._stats[cal.class_id] = ClassStats(
                class_id=cal.class_id,
                count=next(s.count for s in raw if s.class_id == cal.class_id),
                mean=cal.mean_hat,
                cov=cal.cov_hat,
            )
            self._means[cal.class_id] = cal.mean_hat
            self._precisions[cal.class_id] = shrunk_correlation_precision(cal.cov_hat, self.gamma)

    def calibrated_stats(self, class_id: int) -> CalibratedStats:
        stats = self._stats[class_id]
        return CalibratedStats(class_id=class_id, mean_hat=stats.mean, cov_hat=stats.cov)
