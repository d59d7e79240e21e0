"""Similarity-weighted calibration of few-shot class statistics.

A few-shot class borrows from the many-shot base classes: its prototype is
fused with a softmax-weighted mixture of base prototypes, and its covariance
with the same-weighted mixture of base covariances. Weights come from
temperature-scaled cosine similarity between the raw few-shot prototype and
each base prototype; both the prototype and the covariance update reuse the
same weight vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import DimensionMismatchError, softmax
from .types import CalibratedStats, ClassStats, symmetrize


class ZeroNormPrototypeError(ValueError):
    pass


class NoBaseClassesError(ValueError):
    pass


class WeightSumError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationConfig:
    """tau: similarity temperature; alpha: prototype mixing; beta: covariance scale."""

    tau: float = 16.0
    alpha: float = 0.9
    beta: float = 1.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


def similarity(mu_b: np.ndarray, mu_n: np.ndarray, tau: float) -> float:
    """Temperature-scaled cosine similarity between two prototypes."""
    mu_b = np.asarray(mu_b, dtype=np.float64)
    mu_n = np.asarray(mu_n, dtype=np.float64)
    if mu_b.shape != mu_n.shape:
        raise DimensionMismatchError(f"{mu_b.shape} vs {mu_n.shape}")
    nb = np.linalg.norm(mu_b)
    nn = np.linalg.norm(mu_n)
    if nb == 0.0 or nn == 0.0:
        raise ZeroNormPrototypeError("cosine similarity undefined for zero-norm prototype")
    return float(tau * (mu_b @ mu_n) / (nb * nn))


def calibration_weights(base_means: Sequence[np.ndarray], mu_n: np.ndarray, tau: float) -> np.ndarray:
    """Softmax over scaled similarities of mu_n to every base prototype."""
    if len(base_means) == 0:
        raise NoBaseClassesError("calibration requires at least one base class")
    sims = np.array([similarity(mu_b, mu_n, tau) for mu_b in base_means])
    return softmax(sims)


def _check_weights(w: np.ndarray, expected: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (expected,):
        raise DimensionMismatchError(f"{w.shape[0]} weights for {expected} base classes")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise WeightSumError(f"weights sum to {total!r}, expected 1")
    return w


def calibrate_prototype(
    mu_n: np.ndarray,
    base_means: Sequence[np.ndarray],
    w: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """alpha * mu_n + (1 - alpha) * sum_b w_b * mu_b."""
    mu_n = np.asarray(mu_n, dtype=np.float64)
    w = _check_weights(w, len(base_means))
    mix = np.zeros_like(mu_n)
    for wb, mu_b in zip(w, base_means):
        mu_b = np.asarray(mu_b, dtype=np.float64)
        if mu_b.shape != mu_n.shape:
            raise DimensionMismatchError(f"{mu_b.shape} vs {mu_n.shape}")
        mix += wb * mu_b
    return alpha * mu_n + (1.0 - alpha) * mix


def calibrate_covariance(
    cov_n: np.ndarray,
    base_covs: Sequence[np.ndarray],
    w: np.ndarray,
    beta: float,
) -> np.ndarray:
    """beta * (cov_n + sum_b w_b * cov_b), symmetrized.

    The base mixture is added to the raw few-shot covariance (a sum, not a
    convex mix); beta is the only rescaling and beta=0.5 recovers an
    averaging interpretation.
    """
    cov_n = np.asarray(cov_n, dtype=np.float64)
    w = _check_weights(w, len(base_covs))
    mix = np.zeros_like(cov_n)
    for wb, cov_b in zip(w, base_covs):
        cov_b = np.asarray(cov_b, dtype=np.float64)
        if cov_b.shape != cov_n.shape:
            raise DimensionMismatchError(f"{cov_b.shape} vs {cov_n.shape}")
        mix += wb * cov_b
    return symmetrize(beta * (cov_n + mix))


def calibrate_all(
    new_stats: Sequence[ClassStats],
    base_stats: Sequence[ClassStats],
    cfg: CalibrationConfig,
) -> list[CalibratedStats]:
    """Calibrate every new class against the base classes.

    Weights are computed from the raw (uncalibrated) new-class prototype;
    the same weight vector drives both the prototype and covariance updates.
    Base statistics are read, never modified.
    """
    if len(base_stats) == 0:
        raise NoBaseClassesError("calibration requires at least one base class")
    base_means = [s.mean for s in base_stats]
    base_covs = [s.cov for s in base_stats]
    out: list[CalibratedStats] = []
    for stats in new_stats:
        w = calibration_weights(base_means, stats.mean, cfg.tau)
        mean_hat = calibrate_prototype(stats.mean, base_means, w, cfg.alpha)
        cov_hat = calibrate_covariance(stats.cov, base_covs, w, cfg.beta)
        out.append(CalibratedStats(class_id=stats.class_id, mean_hat=mean_hat, cov_hat=cov_hat))
    return out
