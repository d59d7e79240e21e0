import numpy as np
import pytest

from fscil.classifiers import MahalanobisClassifier, NearestMeanClassifier
from fscil.protocol import ProtocolConfig, build_task_stream, evaluate_after_task
from fscil.synthgen import (
    InvalidConfigError,
    SynthConfig,
    ZeroMatrixError,
    build_world,
    covariance_similarity,
    generate,
    store_structure_correlation,
    structure_correlation,
)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        SynthConfig(num_classes=1)
    with pytest.raises(InvalidConfigError):
        SynthConfig(dim=0)
    with pytest.raises(InvalidConfigError):
        SynthConfig(cov_coupling=1.5)
    with pytest.raises(InvalidConfigError):
        SynthConfig(anisotropy=0.5)
    with pytest.raises(InvalidConfigError):
        SynthConfig(train_per_class=0)


def test_generate_is_deterministic():
    cfg = SynthConfig(num_classes=6, dim=8, train_per_class=20, test_per_class=10, seed=9)
    tr1, te1 = generate(cfg)
    tr2, te2 = generate(cfg)
    np.testing.assert_array_equal(tr1.features, tr2.features)
    np.testing.assert_array_equal(te1.features, te2.features)
    np.testing.assert_array_equal(tr1.labels, tr2.labels)

    tr3, _ = generate(SynthConfig(num_classes=6, dim=8, train_per_class=20,
                                  test_per_class=10, seed=10))
    assert not np.array_equal(tr1.features, tr3.features)


def test_generate_counts_and_dtype_width():
    cfg = SynthConfig(num_classes=5, dim=4, train_per_class=17, test_per_class=9, seed=1)
    train, test = generate(cfg)
    assert train.n == 5 * 17 and test.n == 5 * 9
    assert train.d == 4
    for c in range(5):
        assert (train.labels == c).sum() == 17
        assert (test.labels == c).sum() == 9
    # every value survives a float32 round trip unchanged
    np.testing.assert_array_equal(
        train.features, train.features.astype(np.float32).astype(np.float64)
    )


def test_prototype_radius():
    w = build_world(SynthConfig(num_classes=4, dim=16, seed=0, radius=7.0))
    np.testing.assert_allclose(np.linalg.norm(w.prototypes, axis=1), 7.0, rtol=1e-12)

    w2 = build_world(SynthConfig(num_classes=4, dim=16, seed=0))
    np.testing.assert_allclose(
        np.linalg.norm(w2.prototypes, axis=1), 20.0 * np.sqrt(16), rtol=1e-12
    )


def test_covariance_similarity_hand_values():
    eye = np.eye(2)
    assert covariance_similarity(eye, eye) == pytest.approx(1.0, abs=1e-15)
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert covariance_similarity(a, b) == pytest.approx(0.0, abs=1e-15)
    c = np.diag([2.0, 1.0])
    # <c, I> / (|c| |I|) = 3 / (sqrt(5) sqrt(2))
    assert covariance_similarity(c, eye) == pytest.approx(3.0 / np.sqrt(10.0), rel=1e-12)
    with pytest.raises(ZeroMatrixError):
        covariance_similarity(np.zeros((2, 2)), eye)


def test_structure_correlation_matches_pairwise_oracle():
    means = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    covs = [np.diag([1.0, 0.2]), np.array([[1.0, 0.5], [0.5, 1.0]]), np.diag([0.2, 1.0])]
    xs, ys = [], []
    for a in range(3):
        for b in range(a + 1, 3):
            na, nb = means[a] / np.linalg.norm(means[a]), means[b] / np.linalg.norm(means[b])
            xs.append(na @ nb)
            ys.append(covariance_similarity(covs[a], covs[b]))
    expected = np.corrcoef(xs, ys)[0, 1]
    assert structure_correlation(means, covs) == pytest.approx(expected, abs=1e-12)


def test_default_world_prototype_structure_alignment():
    """Class covariance similarity should track prototype similarity (r > 0.5)."""
    cfg = SynthConfig(seed=0)
    world = build_world(cfg)
    r = structure_correlation(world.prototypes, list(world.covariances))
    assert r > 0.5


def test_estimated_structure_correlation_exceeds_half():
    cfg = SynthConfig(seed=3)
    train, _ = generate(cfg)
    assert store_structure_correlation(train) > 0.5


def test_coupling_strengthens_structure_alignment():
    lo = build_world(SynthConfig(seed=2, cov_coupling=0.0))
    hi = build_world(SynthConfig(seed=2, cov_coupling=0.9))

    def r(world):
        return structure_correlation(world.prototypes, list(world.covariances))

    assert r(hi) > r(lo)


def test_coupling_monotone_on_generated_output():
    """The same trend must survive estimation from finite samples."""
    rs = []
    for coupling in (0.0, 0.9):
        train, _ = generate(SynthConfig(seed=2, cov_coupling=coupling))
        rs.append(store_structure_correlation(train))
    assert rs[1] > rs[0]


def test_isotropic_world_covariances_are_spherical():
    cfg = SynthConfig(seed=1, anisotropy=1.0, cov_coupling=0.0)
    world = build_world(cfg)
    for cov in world.covariances:
        var = cov[0, 0]
        np.testing.assert_allclose(cov, var * np.eye(cfg.dim), atol=1e-9 * var)


def test_isotropic_world_fecam_matches_ncm():
    """With spherical, equal covariances the metric holds no information beyond
    the mean, so the two classifiers must land within one accuracy point
    (many-shot fits; 5-shot covariance estimates would add noise, not signal)."""
    gaps = []
    for seed in range(20):
        cfg = SynthConfig(
            num_classes=30, dim=32, train_per_class=400, test_per_class=50,
            anisotropy=1.0, cov_coupling=0.0, seed=seed,
        )
        train, test = generate(cfg)
        pcfg = ProtocolConfig(mode="big_start", base_class_count=30, num_tasks=1, seed=seed)
        stream = build_task_stream(train, test, pcfg)
        task = stream.tasks[0]
        xs = train.features[task.train_indices]
        ys = train.labels[task.train_indices]
        accs = []
        for clf in (NearestMeanClassifier(), MahalanobisClassifier()):
            clf.fit_base(xs, ys)
            preds = clf.predict(test.features[task.test_indices])
            m = evaluate_after_task(
                preds, test.labels[task.test_indices], [task.class_ids], 0
            )
            accs.append(m.acc_overall)
        gaps.append(abs(accs[0] - accs[1]))
    assert np.mean(gaps) < 0.01


def test_minimal_world_end_to_end():
    cfg = SynthConfig(num_classes=2, dim=2, train_per_class=30, test_per_class=10, seed=0,
                      clusters=2)
    train, test = generate(cfg)
    clf = NearestMeanClassifier()
    clf.fit_base(train.features, train.labels)
    preds = clf.predict(test.features)
    assert preds.shape == (test.n,)
    assert set(np.unique(preds)) <= {0, 1}
