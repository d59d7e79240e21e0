"""Experiment orchestration: build a classifier from config, walk it down a
task stream, evaluate after every task on everything seen so far.

Timing is logged to stderr only — reports carry metrics and config echoes,
never wall-clock numbers, so identical runs produce identical bytes.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .calibration import CalibrationConfig
from .classifiers import (
    CalibratedMahalanobisClassifier,
    CalibratedPrototypeClassifier,
    IncrementalClassifier,
    MahalanobisClassifier,
    NearestMeanClassifier,
)
from .datastore import (
    METHODS,
    MethodConfig,
    RunConfig,
    read_store,
    write_report,
)
from .protocol import (
    ProtocolConfig,
    build_task_stream,
    evaluate_after_task,
    finalize_report,
    stream_hash,
)
from .ranpac import (
    CalibratedRandomProjectionRidgeClassifier,
    RandomProjectionRidgeClassifier,
)
from .types import EvalReport, FeatureStore, TaskStream

log = logging.getLogger("fscil")


class TaskCountMismatchError(ValueError):
    pass


def worker_count() -> int:
    """Prediction parallelism cap; FSCIL_THREADS=1 (the default) keeps
    everything on the calling thread."""
    try:
        return max(1, int(os.environ.get("FSCIL_THREADS", "1")))
    except ValueError:
        return 1


def make_classifier(method: MethodConfig, seed: int) -> IncrementalClassifier:
    cal = lambda: CalibrationConfig(
        tau=method.tau, alpha=method.alpha, beta=method.effective_beta
    )
    if method.name == "ncm":
        return NearestMeanClassifier()
    if method.name == "teen":
        return CalibratedPrototypeClassifier(cal())
    if method.name == "fecam":
        return MahalanobisClassifier(gamma=method.gamma)
    if method.name == "cfecam":
        return CalibratedMahalanobisClassifier(cal(), gamma=method.gamma)
    if method.name == "ranpac":
        return RandomProjectionRidgeClassifier(
            proj_dim=method.proj_dim, lambda_grid=method.lambda_grid, seed=seed
        )
    if method.name == "cranpac":
        return CalibratedRandomProjectionRidgeClassifier(
            proj_dim=method.proj_dim,
            lambda_grid=method.lambda_grid,
            seed=seed,
            cfg=cal(),
            sample_count=method.sample_count,
            include_real_features=method.include_real_features,
        )
    raise ValueError(f"unknown method {method.name!r}, expected one of {METHODS}")


def _predict(classifier: IncrementalClassifier, batch: np.ndarray) -> np.ndarray:
    workers = worker_count()
    if workers == 1 or batch.shape[0] < 2 * workers:
        return classifier.predict(batch)
    chunks = np.array_split(batch, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(classifier.predict, chunks))
    return np.concatenate(parts)


def run_stream(
    classifier: IncrementalClassifier,
    stream: TaskStream,
    train_store: FeatureStore,
    test_store: FeatureStore,
) -> EvalReport:
    """Fit task by task; after each task, score the union of all test rows
    whose classes have appeared so far."""
    groups = [t.class_ids for t in stream.tasks]
    per_task = []
    seen_test: list[np.ndarray] = []
    for task in stream.tasks:
        t0 = time.perf_counter()
        X = train_store.features[task.train_indices]
        y = train_store.labels[task.train_indices]
        if task.index == 0:
            classifier.fit_base(X, y)
        else:
            classifier.fit_increment(X, y)
        seen_test.append(task.test_indices)
        test_idx = np.concatenate(seen_test)
        preds = _predict(classifier, test_store.features[test_idx])
        metrics = evaluate_after_task(
            preds, test_store.labels[test_idx], groups, task.index
        )
        per_task.append(metrics)
        log.info(
            "task %d: %d train rows, %d test rows, acc %.4f (%.2fs)",
            task.index, task.train_indices.size, test_idx.size,
            metrics.acc_overall, time.perf_counter() - t0,
        )
    return finalize_report(per_task)


def run_experiment(cfg: RunConfig) -> tuple[EvalReport, dict]:
    """Load stores, build the stream, run the configured method, optionally
    write the report JSON. Returns (report, meta)."""
    train_store = read_store(cfg.train_store)
    test_store = read_store(cfg.test_store)
    stream = build_task_stream(train_store, test_store, cfg.protocol)
    digest = stream_hash(stream)
    log.info("stream hash %s (%d tasks)", digest, len(stream))
    classifier = make_classifier(cfg.method, cfg.protocol.seed)
    report = run_stream(classifier, stream, train_store, test_store)
    meta = {
        "method": cfg.method.name,
        "seed": cfg.protocol.seed,
        "stream_hash": digest,
    }
    if cfg.out:
        write_report(cfg.out, report, meta)
        log.info("report written to %s", cfg.out)
    return report, meta


def run_suite(
    train_store: FeatureStore,
    test_store: FeatureStore,
    protocol: ProtocolConfig,
    methods=None,
) -> dict[str, tuple[EvalReport, dict]]:
    """Run several methods over one shared task stream (fair comparison:
    same split, same seed, same stores)."""
    stream = build_task_stream(train_store, test_store, protocol)
    digest = stream_hash(stream)
    out = {}
    for method in methods or [MethodConfig(name=name) for name in METHODS]:
        classifier = make_classifier(method, protocol.seed)
        t0 = time.perf_counter()
        report = run_stream(classifier, stream, train_store, test_store)
        log.info("%s: a_last %.4f a_inc %.4f (%.2fs)",
                 method.name, report.a_last, report.a_inc, time.perf_counter() - t0)
        out[method.name] = (
            report,
            {"method": method.name, "seed": protocol.seed, "stream_hash": digest},
        )
    return out


def compare_reports(docs: list[dict]) -> str:
    """Merge report dicts into one CSV, one row per method, best value per
    column starred. Expects every report to cover the same task count."""
    if not docs:
        raise TaskCountMismatchError("no reports to compare")
    counts = {len(d["per_task"]) for d in docs}
    if len(counts) != 1:
        raise TaskCountMismatchError(f"reports cover different task counts: {sorted(counts)}")

    hm_tasks = [row["task_index"] for row in docs[0]["per_task"] if "a_hm" in row]
    header = ["method"] + [f"a_hm_task{t}" for t in hm_tasks] + ["a_last", "a_inc"]
    rows = []
    for doc in docs:
        by_index = {row["task_index"]: row for row in doc["per_task"]}
        values = [by_index[t].get("a_hm") for t in hm_tasks]
        if any(v is None for v in values):
            raise TaskCountMismatchError("reports disagree on which tasks carry a_hm")
        rows.append((doc.get("method", "run"), values + [doc["a_last"], doc["a_inc"]]))

    ncols = len(hm_tasks) + 2
    best = [max(r[1][j] for r in rows) for j in range(ncols)]
    lines = [",".join(header)]
    for name, values in rows:
        cells = [name]
        for j, v in enumerate(values):
            mark = "*" if v == best[j] else ""
            cells.append(f"{v:.4f}{mark}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
