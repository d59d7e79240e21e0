"""On-disk formats: the binary feature-store container, JSON run configs,
and JSON/CSV evaluation reports.

The binary layout is little-endian and fixed:

    magic "FSCF" | version u32 | n u64 | d u32 | num_classes u32
    labels  n * i64
    features n*d * f32, row-major

so a valid file is exactly 24 + 8n + 4nd bytes. Features are stored in
single precision and widened to double on load; all math downstream runs
in double.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .protocol import ProtocolConfig
from .ranpac import DEFAULT_LAMBDA_GRID, DEFAULT_PROJ_DIM, DEFAULT_SAMPLE_COUNT
from .types import EvalReport, FeatureStore, TaskMetrics, validate_store

MAGIC = b"FSCF"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")  # magic, version, n, d, num_classes

METHODS = ("ncm", "teen", "fecam", "cfecam", "ranpac", "cranpac")


class StoreFileError(ValueError):
    pass


class BadMagicError(StoreFileError):
    pass


class UnsupportedVersionError(StoreFileError):
    pass


class TruncatedFileError(StoreFileError):
    def __init__(self, path, offset: int, expected: int):
        self.offset = offset
        self.expected = expected
        super().__init__(
            f"{path}: truncated at byte {offset}, expected {expected} bytes"
        )


class ConfigError(ValueError):
    pass


def write_store(path, store: FeatureStore) -> None:
    store = validate_store(store)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.n, store.d, store.num_classes))
        fh.write(store.labels.astype("<i8").tobytes())
        fh.write(store.features.astype("<f4").tobytes())


def read_store(path) -> FeatureStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(path, len(blob), _HEADER.size)
    magic, version, n, d, num_classes = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, expected {VERSION}")
    # size check with plain ints BEFORE any allocation, so a corrupt header
    # can't ask for terabytes
    expected = _HEADER.size + 8 * n + 4 * n * d
    if len(blob) < expected:
        raise TruncatedFileError(path, len(blob), expected)
    if len(blob) > expected:
        raise StoreFileError(
            f"{path}: {len(blob) - expected} trailing bytes after feature block"
        )
    if n == 0:
        raise StoreFileError(f"{path}: empty store (n=0)")
    if d == 0:
        raise StoreFileError(f"{path}: zero feature dimension")
    labels = np.frombuffer(blob, dtype="<i8", count=n, offset=_HEADER.size)
    features = np.frombuffer(
        blob, dtype="<f4", count=n * d, offset=_HEADER.size + 8 * n
    ).reshape(n, d)
    return validate_store(
        FeatureStore(
            features=features.astype(np.float64),
            labels=labels.astype(np.int64),
            num_classes=int(num_classes),
        )
    )


# --------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class MethodConfig:
    name: str
    tau: float = 16.0
    alpha: float = 0.9
    beta: float | None = None  # None -> per-method default (1.0 cfecam, 0.5 cranpac)
    gamma: float = 100.0
    proj_dim: int = DEFAULT_PROJ_DIM
    sample_count: int = DEFAULT_SAMPLE_COUNT
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    include_real_features: bool = False

    def __post_init__(self):
        if self.name not in METHODS:
            raise ConfigError(f"unknown method {self.name!r}, expected one of {METHODS}")

    @property
    def effective_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return 0.5 if self.name == "cranpac" else 1.0


@dataclass(frozen=True)
class RunConfig:
    train_store: str
    test_store: str
    protocol: ProtocolConfig
    method: MethodConfig
    out: str | None = None


_PROTOCOL_KEYS = {
    "mode", "shots", "seed", "base_class_count", "classes_per_task",
    "num_tasks", "shuffle_classes",
}
_METHOD_KEYS = {
    "name", "tau", "alpha", "beta", "gamma", "proj_dim", "sample_count",
    "lambda_grid", "include_real_features",
}
_TOP_KEYS = {"train_store", "test_store", "protocol", "method", "out"}


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def parse_run_config(text: str) -> RunConfig:
    """Parse a JSON run config, rejecting unknown keys by name."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config root")
    for required in ("train_store", "test_store", "method"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r} in config root")

    proto_block = raw.get("protocol", {})
    if not isinstance(proto_block, dict):
        raise ConfigError("key 'protocol' must be an object")
    _reject_unknown(proto_block, _PROTOCOL_KEYS, "protocol block")
    try:
        protocol = ProtocolConfig(**proto_block)
    except TypeError as exc:
        raise ConfigError(f"bad protocol block: {exc}") from exc

    method_block = raw["method"]
    if not isinstance(method_block, dict):
        raise ConfigError("key 'method' must be an object")
    _reject_unknown(method_block, _METHOD_KEYS, "method block")
    if "name" not in method_block:
        raise ConfigError("missing required key 'name' in method block")
    kwargs = dict(method_block)
    if "lambda_grid" in kwargs:
        kwargs["lambda_grid"] = tuple(float(v) for v in kwargs["lambda_grid"])
    method = MethodConfig(**kwargs)

    return RunConfig(
        train_store=raw["train_store"],
        test_store=raw["test_store"],
        protocol=protocol,
        method=method,
        out=raw.get("out"),
    )


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run_config(fh.read())


# --------------------------------------------------------------------------
# reports


def _task_row(m: TaskMetrics) -> dict:
    row = {"task_index": m.task_index, "acc_overall": m.acc_overall, "acc_new": m.acc_new}
    if m.acc_old is not None:
        row["acc_old"] = m.acc_old
    if m.a_hm is not None:
        row["a_hm"] = m.a_hm  # zero serializes as 0, never null
    return row


def report_to_dict(report: EvalReport, meta: dict | None = None) -> dict:
    doc = dict(meta or {})
    doc["per_task"] = [_task_row(m) for m in report.per_task]
    doc["a_last"] = report.a_last
    doc["a_inc"] = report.a_inc
    return doc


def dump_report(report: EvalReport, meta: dict | None = None) -> str:
    """Canonical JSON text: sorted keys, fixed separators, full float
    precision, trailing newline. Two identical runs produce identical
    bytes."""
    return json.dumps(report_to_dict(report, meta), sort_keys=True,
                      separators=(",", ":")) + "\n"


def write_report(path, report: EvalReport, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_report(report, meta))


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def report_from_dict(doc: dict) -> EvalReport:
    per_task = tuple(
        TaskMetrics(
            task_index=row["task_index"],
            acc_overall=row["acc_overall"],
            acc_new=row["acc_new"],
            acc_old=row.get("acc_old"),
            a_hm=row.get("a_hm"),
        )
        for row in doc["per_task"]
    )
    return EvalReport(per_task=per_task, a_last=doc["a_last"], a_inc=doc["a_inc"])


def report_csv(report: EvalReport, label: str = "run") -> str:
    """One-row CSV shaped like the summary tables: harmonic means for every
    incremental task, then the final and averaged overall accuracies."""
    tasks = [m for m in report.per_task if m.a_hm is not None]
    header = ["method"] + [f"a_hm_task{m.task_index}" for m in tasks] + ["a_last", "a_inc"]
    values = [label] + [repr(m.a_hm) for m in tasks] + [repr(report.a_last), repr(report.a_inc)]
    return ",".join(header) + "\n" + ",".join(values) + "\n"


def write_report_csv(path, report: EvalReport, label: str = "run") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_csv(report, label))
