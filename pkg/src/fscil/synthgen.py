"""Synthetic embedding worlds with coupled prototype/covariance structure.

Class prototypes live on a sphere, grouped around a handful of cluster
directions, and each class covariance is a blend of its own random shape
with a prototype-similarity-weighted mixture of per-cluster anchor shapes.
Classes that point the same way therefore share covariance structure,
which is exactly the regularity the calibrated classifiers exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import estimate_stats, make_rng, sample_gaussian, softmax
from .types import FeatureStore, symmetrize

PROTOTYPE_TAG = 20
ANCHOR_TAG = 21
SAMPLE_TAG = 22


class InvalidConfigError(ValueError):
    pass


class ZeroMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 30
    dim: int = 32
    train_per_class: int = 100
    test_per_class: int = 50
    anisotropy: float = 20.0
    cov_coupling: float = 0.8
    seed: int = 0
    # geometry knobs; defaults were fixed empirically so that the default
    # world shows a clear prototype/covariance similarity trend and a
    # measurable many-shot vs few-shot gap
    clusters: int = 6
    cluster_spread: float = 0.6  # norm of the jitter around a cluster center
    var_scale: float = 200.0  # geometric-mean eigenvalue of class covariances
    mix_temperature: float = 16.0
    radius: float | None = None  # None -> 20 * sqrt(dim)

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidConfigError(f"need at least 2 classes, got {self.num_classes}")
        if self.dim < 2:
            raise InvalidConfigError(f"need dim >= 2, got {self.dim}")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise InvalidConfigError("per-class sample counts must be >= 1")
        if not 0.0 <= self.cov_coupling <= 1.0:
            raise InvalidConfigError(f"cov_coupling must be in [0,1], got {self.cov_coupling}")
        if self.anisotropy < 1.0:
            raise InvalidConfigError(f"anisotropy must be >= 1, got {self.anisotropy}")
        if self.clusters < 1:
            raise InvalidConfigError(f"clusters must be >= 1, got {self.clusters}")
        if self.var_scale <= 0 or self.cluster_spread < 0 or self.mix_temperature < 0:
            raise InvalidConfigError("var_scale must be > 0, spreads must be >= 0")
        if self.radius is not None and self.radius <= 0:
            raise InvalidConfigError(f"radius must be > 0, got {self.radius}")

    @property
    def sphere_radius(self) -> float:
        # paired with var_scale so that base classes separate well while
        # five-shot covariance estimates still fail visibly
        return 20.0 * np.sqrt(self.dim) if self.radius is None else self.radius


@dataclass(frozen=True)
class World:
    """Ground-truth class parameters behind a generated dataset."""

    prototypes: np.ndarray  # num_classes x d
    covariances: np.ndarray  # num_classes x d x d


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _random_shape(d: int, anisotropy: float, var_scale: float, rng) -> np.ndarray:
    """Rotated diagonal with condition number `anisotropy`, geometric-mean
    eigenvalue `var_scale`."""
    half = np.sqrt(anisotropy)
    eigs = np.geomspace(var_scale / half, var_scale * half, d)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))  # fix the sign convention so Q is unique
    return symmetrize(Q @ np.diag(eigs) @ Q.T)


def build_world(cfg: SynthConfig) -> World:
    proto_rng = make_rng(cfg.seed, PROTOTYPE_TAG)
    # cluster centers in the positive orthant, like post-activation embedding
    # prototypes: pairwise cosines stay positive, so prototype similarity has
    # a smooth, wide range instead of piling up near zero
    centers = _unit_rows(np.abs(proto_rng.standard_normal((cfg.clusters, cfg.dim))))
    # round-robin cluster membership: class c belongs to cluster c mod K,
    # so a base task taking the first classes still touches every cluster
    directions = np.empty((cfg.num_classes, cfg.dim))
    jitter = cfg.cluster_spread / np.sqrt(cfg.dim)  # spread = total jitter norm
    for c in range(cfg.num_classes):
        center = centers[c % cfg.clusters]
        directions[c] = center + jitter * proto_rng.standard_normal(cfg.dim)
    prototypes = cfg.sphere_radius * _unit_rows(directions)

    anchor_rng = make_rng(cfg.seed, ANCHOR_TAG)
    anchors = np.stack(
        [_random_shape(cfg.dim, cfg.anisotropy, cfg.var_scale, anchor_rng)
         for _ in range(cfg.clusters)]
    )
    owns = np.stack(
        [_random_shape(cfg.dim, cfg.anisotropy, cfg.var_scale, anchor_rng)
         for _ in range(cfg.num_classes)]
    )

    unit_protos = _unit_rows(prototypes)
    covariances = np.empty_like(owns)
    for c in range(cfg.num_classes):
        w = softmax(cfg.mix_temperature * centers @ unit_protos[c])
        mixed = np.tensordot(w, anchors, axes=1)
        covariances[c] = symmetrize(
            (1.0 - cfg.cov_coupling) * owns[c] + cfg.cov_coupling * mixed
        )
    return World(prototypes=prototypes, covariances=covariances)


def generate(cfg: SynthConfig) -> tuple[FeatureStore, FeatureStore]:
    """Draw (train, test) stores from the world's per-class Gaussians.

    Values are squeezed through float32 so that a round trip through the
    on-disk feature format reproduces them bit for bit.
    """
    world = build_world(cfg)
    n_train = cfg.num_classes * cfg.train_per_class
    n_test = cfg.num_classes * cfg.test_per_class
    train = np.empty((n_train, cfg.dim))
    test = np.empty((n_test, cfg.dim))
    train_labels = np.repeat(np.arange(cfg.num_classes, dtype=np.int64), cfg.train_per_class)
    test_labels = np.repeat(np.arange(cfg.num_classes, dtype=np.int64), cfg.test_per_class)
    for c in range(cfg.num_classes):
        rng = make_rng(cfg.seed, SAMPLE_TAG, c)
        rows = sample_gaussian(
            world.prototypes[c], world.covariances[c], cfg.train_per_class + cfg.test_per_class, rng
        )
        train[c * cfg.train_per_class : (c + 1) * cfg.train_per_class] = rows[: cfg.train_per_class]
        test[c * cfg.test_per_class : (c + 1) * cfg.test_per_class] = rows[cfg.train_per_class :]
    train = train.astype(np.float32).astype(np.float64)
    test = test.astype(np.float32).astype(np.float64)
    return (
        FeatureStore(features=train, labels=train_labels, num_classes=cfg.num_classes),
        FeatureStore(features=test, labels=test_labels, num_classes=cfg.num_classes),
    )


def covariance_similarity(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    """Cosine similarity of the flattened matrices (Frobenius inner product)."""
    cov_a = np.asarray(cov_a, dtype=np.float64)
    cov_b = np.asarray(cov_b, dtype=np.float64)
    if cov_a.shape != cov_b.shape:
        raise ZeroMatrixError(f"shape mismatch {cov_a.shape} vs {cov_b.shape}")
    na, nb = np.linalg.norm(cov_a), np.linalg.norm(cov_b)
    if na == 0.0 or nb == 0.0:
        raise ZeroMatrixError("covariance similarity undefined for a zero matrix")
    return float(np.tensordot(cov_a, cov_b) / (na * nb))


def structure_correlation(means: np.ndarray, covs) -> float:
    """Pearson correlation, over class pairs, between prototype cosine
    similarity and covariance similarity. This is the scatter-plot trend
    the calibrated methods bank on."""
    means = np.asarray(means, dtype=np.float64)
    k = means.shape[0]
    proto_sims, cov_sims = [], []
    unit = _unit_rows(means)
    for a in range(k):
        for b in range(a + 1, k):
            proto_sims.append(float(unit[a] @ unit[b]))
            cov_sims.append(covariance_similarity(covs[a], covs[b]))
    return float(np.corrcoef(proto_sims, cov_sims)[0, 1])


def store_structure_correlation(store: FeatureStore) -> float:
    """structure_correlation over statistics estimated from a store."""
    stats = [
        estimate_stats(store.features[store.rows_of_class(c)], c)
        for c in range(store.num_classes)
    ]
    return structure_correlation(
        np.stack([s.mean for s in stats]), [s.cov for s in stats]
    )
