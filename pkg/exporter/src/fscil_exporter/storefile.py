"""Writer for the fscil feature-store binary format.

Layout (little-endian): magic b"FSCF", version u32 (=1), n u64, d u32,
num_classes u32, then n int64 labels and n*d float32 features row-major.
Total length is exactly 24 + 8n + 4nd bytes. Kept deliberately independent
of the fscil package: the byte layout is the contract between the two.
"""

import struct

import numpy as np

_HEADER = struct.Struct("<4sIQII")
MAGIC = b"FSCF"
VERSION = 1


def write_store_file(path, labels: np.ndarray, features: np.ndarray,
                     num_classes: int) -> None:
    labels = np.ascontiguousarray(labels, dtype="<i8")
    features = np.ascontiguousarray(features, dtype="<f4")
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    n, d = features.shape
    if labels.shape != (n,):
        raise ValueError(f"{labels.shape[0]} labels for {n} feature rows")
    if n == 0 or d == 0:
        raise ValueError("refusing to write an empty store")
    if not np.isfinite(features).all():
        raise ValueError("non-finite feature values")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("label outside [0, num_classes)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d, num_classes))
        fh.write(labels.tobytes())
        fh.write(features.tobytes())
