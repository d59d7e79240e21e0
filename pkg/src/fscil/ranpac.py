"""Random-projection ridge classifiers.

Features are lifted through a frozen random matrix and a clamp-at-zero
nonlinearity into a high-dimensional space where classes are read out by
ridge regression against an incrementally accumulated Gram matrix. The
calibrated variant never feeds raw few-shot rows into the accumulator;
it samples from calibrated per-class Gaussians instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationConfig, calibrate_all
from .classifiers import BaseNotFittedError, IncrementalClassifier, NoClassesSeenError, split_by_class
from .numerics import DimensionMismatchError, estimate_stats, make_rng, sample_gaussian
from .types import ClassStats, symmetrize

DEFAULT_PROJ_DIM = 10000
DEFAULT_SAMPLE_COUNT = 800
# powers of ten, 1e-8 .. 1e8
DEFAULT_LAMBDA_GRID = tuple(10.0 ** k for k in range(-8, 9))

# spawn-key tags so each random stream is independent of the others
PROJECTION_TAG = 30
LAMBDA_SPLIT_TAG = 31
SAMPLE_TAG = 32


class UnknownLabelError(ValueError):
    pass


class SingularSystemError(ValueError):
    pass


class EmptyCandidatesError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionState:
    """Frozen random lift: h = max(0, f @ W)."""

    W: np.ndarray  # d x D
    proj_dim: int

    @property
    def d(self) -> int:
        return self.W.shape[0]


@dataclass
class GramState:
    """Accumulated second moments G and per-class projected-feature sums."""

    G: np.ndarray  # D x D
    sums: dict[int, np.ndarray] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)
    lam: float | None = None

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.sums)

    def class_matrix(self) -> np.ndarray:
        """Stack per-class sums column-wise in ascending class-id order."""
        if not self.sums:
            raise NoClassesSeenError("no classes accumulated")
        return np.stack([self.sums[c] for c in self.class_ids], axis=1)


def init_projection(d: int, proj_dim: int, rng: np.random.Generator) -> ProjectionState:
    if d < 1 or proj_dim < 1:
        raise DimensionMismatchError(f"need d >= 1 and proj_dim >= 1, got {d}, {proj_dim}")
    W = rng.standard_normal((d, proj_dim))
    W.setflags(write=False)
    return ProjectionState(W=W, proj_dim=proj_dim)


def project(features: np.ndarray, state: ProjectionState) -> np.ndarray:
    """Lift rows through W and clamp negatives to zero."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    if features.shape[1] != state.d:
        raise DimensionMismatchError(
            f"features have {features.shape[1]} columns, projection expects {state.d}"
        )
    return np.maximum(features @ state.W, 0.0)


def empty_gram(proj_dim: int) -> GramState:
    return GramState(G=np.zeros((proj_dim, proj_dim)))


def accumulate(gram: GramState, H: np.ndarray, labels: np.ndarray) -> GramState:
    """Fold a batch of projected rows into G and the per-class sums.

    Mutates `gram` in place and returns it. G is re-symmetrized after each
    call so float noise never drifts it off the symmetric cone.
    """
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels)
    if H.shape[0] != labels.shape[0]:
        raise DimensionMismatchError(
            f"{H.shape[0]} rows but {labels.shape[0]} labels"
        )
    if H.shape[0] == 0:
        return gram
    if labels.size and labels.min() < 0:
        raise UnknownLabelError(f"negative label {int(labels.min())}")
    gram.G += H.T @ H
    gram.G = symmetrize(gram.G)
    for class_id in np.unique(labels):
        rows = H[labels == class_id]
        key = int(class_id)
        if key in gram.sums:
            gram.sums[key] = gram.sums[key] + rows.sum(axis=0)
        else:
            gram.sums[key] = rows.sum(axis=0)
        gram.counts[key] = gram.counts.get(key, 0) + rows.shape[0]
    return gram


def _readout(gram: GramState, lam: float) -> np.ndarray:
    """(G + lam I)^-1 C, the D x Y ridge readout matrix."""
    A = gram.G + lam * np.eye(gram.G.shape[0])
    try:
        return np.linalg.solve(A, gram.class_matrix())
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"ridge system singular at lambda={lam}") from exc


def ridge_scores(h: np.ndarray, gram: GramState, lam: float | None = None) -> np.ndarray:
    """Per-class scores h'(G+lam I)^-1 c_y for one projected vector."""
    if lam is None:
        if gram.lam is None:
            raise SingularSystemError("lambda not set on GramState")
        lam = gram.lam
    h = np.asarray(h, dtype=np.float64)
    return h @ _readout(gram, lam)


def select_lambda(
    H: np.ndarray,
    labels: np.ndarray,
    candidates=DEFAULT_LAMBDA_GRID,
    seed: int = 0,
) -> float:
    """Pick the ridge strength by MSE against one-hot targets on a held-out
    fifth of the base task, then freeze it.

    The split is a seeded permutation: first 80% fit, last 20% score. Ties
    go to the earliest candidate in the grid.
    """
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidatesError("no lambda candidates")
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = H.shape[0]
    order = make_rng(seed, LAMBDA_SPLIT_TAG).permutation(n)
    cut = max(1, int(round(0.8 * n)))
    if cut >= n:
        cut = n - 1  # keep at least one held-out row
    fit_idx, val_idx = order[:cut], order[cut:]

    gram = empty_gram(H.shape[1])
    accumulate(gram, H[fit_idx], labels[fit_idx])
    class_ids = sorted(set(int(c) for c in np.unique(labels)))
    # classes absent from the fit split still get a (zero) column so the
    # one-hot targets line up
    for c in class_ids:
        if c not in gram.sums:
            gram.sums[c] = np.zeros(H.shape[1])
            gram.counts[c] = 0

    col = {c: j for j, c in enumerate(gram.class_ids)}
    onehot = np.zeros((val_idx.size, len(col)))
    for i, y in enumerate(labels[val_idx]):
        onehot[i, col[int(y)]] = 1.0

    best_lam, best_mse = None, np.inf
    for lam in candidates:
        scores = H[val_idx] @ _readout(gram, float(lam))
        mse = float(np.mean((scores - onehot) ** 2))
        if mse < best_mse:
            best_lam, best_mse = float(lam), mse
    return best_lam


class RandomProjectionRidgeClassifier(IncrementalClassifier):
    """Ridge readout over a frozen random nonlinear lift.

    Base task: draw W, pick lambda on an 80/20 split, accumulate all base
    rows. Increments: accumulate the raw few-shot rows. W and lambda never
    change after the base fit.
    """

    def __init__(
        self,
        proj_dim: int = DEFAULT_PROJ_DIM,
        lambda_grid=DEFAULT_LAMBDA_GRID,
        seed: int = 0,
    ):
        self.proj_dim = proj_dim
        self.lambda_grid = tuple(lambda_grid)
        self.seed = seed
        self.projection: ProjectionState | None = None
        self.gram: GramState | None = None

    @property
    def lam(self) -> float | None:
        return None if self.gram is None else self.gram.lam

    def fit_base(self, features, labels) -> None:
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        self.projection = init_projection(
            features.shape[1], self.proj_dim, make_rng(self.seed, PROJECTION_TAG)
        )
        H = project(features, self.projection)
        lam = select_lambda(H, labels, self.lambda_grid, seed=self.seed)
        self.gram = empty_gram(self.proj_dim)
        self.gram.lam = lam
        accumulate(self.gram, H, labels)

    def fit_increment(self, features, labels) -> None:
        if self.gram is None or self.projection is None:
            raise BaseNotFittedError("fit_base must run before fit_increment")
        H = project(np.asarray(features, dtype=np.float64), self.projection)
        accumulate(self.gram, H, np.asarray(labels, dtype=np.int64))

    def predict(self, batch) -> np.ndarray:
        if self.gram is None or self.gram.lam is None:
            raise BaseNotFittedError("classifier not fitted")
        H = project(np.asarray(batch, dtype=np.float64), self.projection)
        scores = H @ _readout(self.gram, self.gram.lam)
        ids = np.asarray(self.gram.class_ids, dtype=np.int64)
        return ids[np.argmax(scores, axis=1)]  # argmax ties -> lowest id

    def seen_classes(self) -> set[int]:
        return set() if self.gram is None else set(self.gram.class_ids)


class CalibratedRandomProjectionRidgeClassifier(RandomProjectionRidgeClassifier):
    """Ridge readout where few-shot classes are represented by points sampled
    from calibrated Gaussians instead of the raw shots.

    Per new class: calibrate (mean, cov) against the base statistics, draw
    `sample_count` points in the original feature space, lift them through
    the frozen W, and accumulate those. The raw shots are accumulated only
    when `include_real_features` is switched on.
    """

    def __init__(
        self,
        proj_dim: int = DEFAULT_PROJ_DIM,
        lambda_grid=DEFAULT_LAMBDA_GRID,
        seed: int = 0,
        cfg: CalibrationConfig | None = None,
        sample_count: int = DEFAULT_SAMPLE_COUNT,
        include_real_features: bool = False,
    ):
        super().__init__(proj_dim=proj_dim, lambda_grid=lambda_grid, seed=seed)
        self.cfg = cfg or CalibrationConfig(beta=0.5)
        self.sample_count = sample_count
        self.include_real_features = include_real_features
        self._base_stats: list[ClassStats] = []

    def fit_base(self, features, labels) -> None:
        super().fit_base(features, labels)
        self._base_stats = [
            estimate_stats(rows, class_id)
            for class_id, rows in split_by_class(features, labels).items()
        ]

    def fit_increment(self, features, labels) -> None:
        if self.gram is None or self.projection is None:
            raise BaseNotFittedError("fit_base must run before fit_increment")
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        raw = [
            estimate_stats(rows, class_id)
            for class_id, rows in split_by_class(features, labels).items()
        ]
        calibrated = calibrate_all(raw, self._base_stats, self.cfg)
        for cal in calibrated:  # calibrate_all returns ascending class id
            if self.sample_count > 0:
                rng = make_rng(self.seed, SAMPLE_TAG, cal.class_id)
                drawn = sample_gaussian(cal.mean_hat, cal.cov_hat, self.sample_count, rng)
                H = project(drawn, self.projection)
                accumulate(
                    self.gram, H, np.full(self.sample_count, cal.class_id, dtype=np.int64)
                )
        if self.include_real_features:
            H = project(features, self.projection)
            accumulate(self.gram, H, labels)
