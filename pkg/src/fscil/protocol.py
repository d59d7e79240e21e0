"""Task-stream construction and evaluation metrics for the few-shot
class-incremental protocol.

A stream is a fixed partition of the class ids into a base task plus
k-shot increments. Train rows for increments are subsampled to exactly
`shots` per class with a per-class seeded stream, so the draw for class c
never depends on how many other classes exist.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .numerics import make_rng
from .types import EvalReport, FeatureStore, Task, TaskMetrics, TaskStream

SHOT_TAG = 10
SHUFFLE_TAG = 11

MODES = ("big_start", "small_start")


class ProtocolError(ValueError):
    pass


class InsufficientSamplesError(ProtocolError):
    def __init__(self, class_id: int, have: int, need: int):
        self.class_id = class_id
        super().__init__(f"class {class_id} has {have} train rows, need {need}")


class InsufficientClassesError(ProtocolError):
    pass


class MissingPredictionsError(ProtocolError):
    pass


class EmptyRunError(ProtocolError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    """How to slice a dataset into a base task plus increments.

    big_start: task 0 holds `base_class_count` classes, the rest are split
    evenly over the remaining `num_tasks` - 1 tasks. small_start: every task
    holds `classes_per_task` classes. Only the base task is many-shot.
    """

    mode: str = "big_start"
    shots: int = 5
    seed: int = 0
    base_class_count: int | None = None
    classes_per_task: int | None = None
    num_tasks: int | None = None
    shuffle_classes: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ProtocolError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.shots < 1:
            raise ProtocolError(f"shots must be >= 1, got {self.shots}")
        if self.mode == "big_start" and self.base_class_count is None:
            raise ProtocolError("big_start requires base_class_count")
        if self.mode == "small_start" and self.classes_per_task is None:
            raise ProtocolError("small_start requires classes_per_task")


def _class_order(num_classes: int, cfg: ProtocolConfig) -> np.ndarray:
    order = np.arange(num_classes, dtype=np.int64)
    if cfg.shuffle_classes:
        order = make_rng(cfg.seed, SHUFFLE_TAG).permutation(order)
    return order


def _split_classes(num_classes: int, cfg: ProtocolConfig) -> list[np.ndarray]:
    """Partition the (possibly shuffled) class order into per-task groups."""
    order = _class_order(num_classes, cfg)
    if cfg.mode == "big_start":
        base = cfg.base_class_count
        if base < 1 or base > num_classes:
            raise InsufficientClassesError(
                f"base_class_count {base} out of range for {num_classes} classes"
            )
        rest = num_classes - base
        if cfg.num_tasks is None:
            raise ProtocolError("big_start requires num_tasks")
        increments = cfg.num_tasks - 1
        if increments < 0 or (increments == 0 and rest > 0):
            raise InsufficientClassesError(
                f"{rest} classes left over after base task with num_tasks={cfg.num_tasks}"
            )
        if increments > 0:
            if rest == 0 or rest % increments != 0:
                raise InsufficientClassesError(
                    f"{rest} non-base classes do not split evenly into {increments} tasks"
                )
            per = rest // increments
            groups = [order[:base]] + [
                order[base + i * per : base + (i + 1) * per] for i in range(increments)
            ]
        else:
            groups = [order[:base]]
    else:
        per = cfg.classes_per_task
        if per < 1 or num_classes % per != 0:
            raise InsufficientClassesError(
                f"{num_classes} classes do not split evenly into groups of {per}"
            )
        count = num_classes // per
        if cfg.num_tasks is not None and cfg.num_tasks != count:
            raise InsufficientClassesError(
                f"num_tasks={cfg.num_tasks} inconsistent with "
                f"{num_classes} classes / {per} per task"
            )
        groups = [order[i * per : (i + 1) * per] for i in range(count)]
    return groups


def build_task_stream(
    train_store: FeatureStore, test_store: FeatureStore, cfg: ProtocolConfig
) -> TaskStream:
    """Slice train/test stores into the base-plus-increments task stream.

    Task 0 keeps every train row of its classes; each later task keeps
    exactly cfg.shots rows per class, drawn without replacement from a
    stream seeded by (seed, class). Test indices are all test rows of the
    task's own classes — evaluation over everything seen so far is the
    runner's job.
    """
    if train_store.num_classes != test_store.num_classes:
        raise ProtocolError(
            f"train store has {train_store.num_classes} classes, "
            f"test store has {test_store.num_classes}"
        )
    groups = _split_classes(train_store.num_classes, cfg)
    tasks = []
    for t, class_ids in enumerate(groups):
        train_parts = []
        for class_id in class_ids.tolist():
            rows = train_store.rows_of_class(class_id)
            if t == 0:
                if rows.size == 0:
                    raise InsufficientSamplesError(class_id, 0, 1)
                train_parts.append(rows)
            else:
                if rows.size < cfg.shots:
                    raise InsufficientSamplesError(class_id, rows.size, cfg.shots)
                pick = make_rng(cfg.seed, SHOT_TAG, class_id).choice(
                    rows.size, size=cfg.shots, replace=False
                )
                train_parts.append(rows[np.sort(pick)])
        test_parts = [test_store.rows_of_class(c) for c in class_ids.tolist()]
        tasks.append(
            Task(
                index=t,
                class_ids=class_ids,
                train_indices=np.concatenate(train_parts),
                test_indices=np.concatenate(test_parts) if test_parts else np.empty(0, np.int64),
                shots=None if t == 0 else cfg.shots,
            )
        )
    return TaskStream(tasks=tuple(tasks))


def stream_hash(stream: TaskStream) -> str:
    """Platform-stable sha256 of the stream's exact index content."""
    h = hashlib.sha256()
    for task in stream.tasks:
        h.update(b"task")
        h.update(np.asarray([task.index, -1 if task.shots is None else task.shots],
                            dtype="<i8").tobytes())
        for arr in (task.class_ids, task.train_indices, task.test_indices):
            h.update(np.asarray(arr, dtype="<i8").tobytes())
            h.update(b"|")
    return h.hexdigest()


def a_hm(acc_old: float, acc_new: float) -> float:
    """Harmonic mean of old/new accuracy; 0 when both sides are 0."""
    denom = acc_old + acc_new
    if denom == 0.0:
        return 0.0
    if acc_old == acc_new:
        # keep a_hm(x, x) == x exact instead of drifting an ulp
        return acc_old
    return 2.0 * acc_old * acc_new / denom


def evaluate_after_task(
    predictions: np.ndarray,
    truth: np.ndarray,
    task_class_ids,
    t: int,
) -> TaskMetrics:
    """Metrics over the cumulative test set after task t.

    task_class_ids holds the per-task class-id groups for tasks 0..t (or
    more; extras are ignored). Old = classes from tasks < t, new = task t's
    classes. At t=0 there is no old group, so acc_old and a_hm stay None.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise MissingPredictionsError(
            f"{predictions.shape[0]} predictions for {truth.shape[0]} test rows"
        )
    if truth.size == 0:
        raise MissingPredictionsError("empty test set")
    if len(task_class_ids) <= t:
        raise MissingPredictionsError(f"no class groups supplied for task {t}")
    new_classes = {int(c) for c in task_class_ids[t]}
    old_classes: set[int] = set()
    for g in task_class_ids[:t]:
        old_classes.update(int(c) for c in g)
    seen = old_classes | new_classes
    if not set(np.unique(truth).tolist()) <= seen:
        raise MissingPredictionsError("test rows contain classes outside tasks 0..t")

    correct = predictions == truth
    acc_overall = float(correct.mean())
    new_mask = np.isin(truth, sorted(new_classes))
    acc_new = float(correct[new_mask].mean()) if new_mask.any() else 0.0
    if t == 0:
        return TaskMetrics(task_index=t, acc_overall=acc_overall, acc_new=acc_new)
    old_mask = ~new_mask
    acc_old = float(correct[old_mask].mean()) if old_mask.any() else 0.0
    return TaskMetrics(
        task_index=t,
        acc_overall=acc_overall,
        acc_new=acc_new,
        acc_old=acc_old,
        a_hm=a_hm(acc_old, acc_new),
    )


def finalize_report(per_task) -> EvalReport:
    """Bundle per-task metrics into the final report.

    a_last is the overall accuracy after the final task; a_inc averages
    overall accuracy across every task including the base one.
    """
    per_task = list(per_task)
    if not per_task:
        raise EmptyRunError("no per-task metrics")
    indices = [m.task_index for m in per_task]
    if indices != list(range(len(per_task))):
        raise ProtocolError(f"task indices not contiguous from 0: {indices}")
    accs = [m.acc_overall for m in per_task]
    return EvalReport(
        per_task=tuple(per_task),
        a_last=float(accs[-1]),
        a_inc=float(np.mean(accs)),
    )
