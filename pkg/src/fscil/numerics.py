"""Linear-algebra substrate: covariance estimation, shrinkage, correlation
normalization, Mahalanobis distance, SPD inversion, softmax and multivariate
Gaussian sampling.

All randomness flows through `make_rng`, a Philox counter-based generator
keyed by a 64-bit seed plus an explicit spawn key, so every stochastic
operation is reproducible and independently streamable per (seed, key).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .types import ClassStats, symmetrize


class DimensionMismatchError(ValueError):
    pass


class EmptyClassError(ValueError):
    pass


class NegativeGammaError(ValueError):
    pass


class NonPositiveDiagonalError(ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"diagonal entry {index} is {value!r}, must be > 0")
        self.index = index
        self.value = value


class NotPositiveDefiniteError(ValueError):
    pass


class EmptyVectorError(ValueError):
    pass


class IrreparablyIndefiniteError(ValueError):
    pass


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for stream (seed, key).

    Philox is counter-based and platform-stable; distinct spawn keys give
    statistically independent streams from one 64-bit experiment seed.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def estimate_stats(features: np.ndarray, class_id: int) -> ClassStats:
    """Mean and population covariance (1/m denominator) of one class.

    The 1/m form matches the public implementations of the methods built on
    top of it; with 5-shot classes the choice is material and is fixed here.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyClassError(f"class {class_id}: no samples (shape {x.shape})")
    m = x.shape[0]
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / m
    return ClassStats(class_id=int(class_id), count=m, mean=mean, cov=cov)


def shrink(cov: np.ndarray, gamma: float) -> np.ndarray:
    """cov + gamma * I; full-rank for gamma > 0 when cov is PSD."""
    if gamma < 0:
        raise NegativeGammaError(f"gamma must be >= 0, got {gamma}")
    cov = np.asarray(cov, dtype=np.float64)
    return cov + gamma * np.eye(cov.shape[0])


def correlation_normalize(cov: np.ndarray) -> np.ndarray:
    """Rescale a covariance so the diagonal is exactly 1.

    out[i, j] = cov[i, j] / (sqrt(cov[i, i]) * sqrt(cov[j, j]))
    """
    cov = np.asarray(cov, dtype=np.float64)
    diag = np.diag(cov)
    bad = np.flatnonzero(~(diag > 0))
    if bad.size:
        i = int(bad[0])
        raise NonPositiveDiagonalError(i, float(diag[i]))
    scale = np.sqrt(diag)
    out = cov / np.outer(scale, scale)
    np.fill_diagonal(out, 1.0)
    return out


def mahalanobis_sq(x: np.ndarray, mu: np.ndarray, precision: np.ndarray) -> float:
    """(x - mu)^T P (x - mu)."""
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if x.shape != mu.shape or precision.shape != (x.shape[-1], x.shape[-1]):
        raise DimensionMismatchError(
            f"x {x.shape}, mu {mu.shape}, precision {precision.shape}"
        )
    diff = x - mu
    return float(diff @ precision @ diff)


def mahalanobis_sq_batch(batch: np.ndarray, mu: np.ndarray, precision: np.ndarray) -> np.ndarray:
    """Row-wise squared Mahalanobis distances of a batch to one class."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1] != mu.shape[0]:
        raise DimensionMismatchError(f"batch d={batch.shape[1]}, mu d={mu.shape[0]}")
    diff = batch - mu
    return np.einsum("ij,jk,ik->i", diff, precision, diff)


def invert_spd(mat: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    mat = np.asarray(mat, dtype=np.float64)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc
    inv_chol = solve_triangular(chol, np.eye(mat.shape[0]), lower=True, check_finite=False)
    return symmetrize(inv_chol.T @ inv_chol)


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtracted before exponentiation)."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EmptyVectorError("softmax of an empty vector")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


# PSD repair ladder for sampling: rank-deficient few-shot covariances mixed by
# calibration can be numerically indefinite.
_JITTER_START = 1e-10
_JITTER_LIMIT = 1e-4


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of cov, jittering the diagonal if needed."""
    if not cov.any():
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    base = float(np.trace(cov)) / cov.shape[0]
    if base <= 0:
        raise IrreparablyIndefiniteError(f"trace {np.trace(cov)!r} leaves no jitter scale")
    eye = np.eye(cov.shape[0])
    eps = _JITTER_START * base
    limit = _JITTER_LIMIT * base
    while eps <= limit * (1 + 1e-12):
        try:
            return np.linalg.cholesky(cov + eps * eye)
        except np.linalg.LinAlgError:
            eps *= 10
    raise IrreparablyIndefiniteError(
        f"factorization failed after jitter up to {limit:.3e}"
    )


def sample_gaussian(mean: np.ndarray, cov: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n rows from N(mean, cov) as mean + z @ L^T, deterministic in rng."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise DimensionMismatchError(f"mean d={d}, cov {cov.shape}")
    factor = _psd_factor(cov)
    z = rng.standard_normal((n, d))
    return mean + z @ factor.T
