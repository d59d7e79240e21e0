"""Batch feature extraction from an image-folder dataset to a store file."""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torchvision import transforms

from .dataset import decode_rgb, scan_split
from .errors import MissingDatasetError
from .model import EMBED_DIM, PREPROCESS, load_backbone
from .storefile import write_store_file

log = logging.getLogger("fscil_exporter")


@dataclass(frozen=True)
class ExportJob:
    data_root: str
    split: str  # "train" | "test"
    out: str
    checkpoint: str | None = None
    batch: int = 16
    device: str = "cpu"


@dataclass(frozen=True)
class ExportResult:
    n: int
    d: int
    num_classes: int
    skipped: int


def _make_transform():
    p = PREPROCESS
    return transforms.Compose([
        transforms.Resize(p["resize"]),
        transforms.CenterCrop(p["crop"]),
        transforms.ToTensor(),
        transforms.Normalize(mean=p["mean"], std=p["std"]),
    ])


def run_export(job: ExportJob) -> ExportResult:
    if job.split not in ("train", "test"):
        raise MissingDatasetError(f"split must be train or test, got {job.split!r}")
    # single-threaded math by default: reduction order, and therefore the
    # output bytes, must not depend on the host's core count
    torch.set_num_threads(int(os.environ.get("EXPORTER_THREADS", "1")))

    class_names, items = scan_split(job.data_root, job.split)
    model, weights_tag = load_backbone(job.checkpoint)
    device = torch.device(job.device)
    model.to(device)
    tf = _make_transform()

    labels: list[int] = []
    chunks: list[np.ndarray] = []
    pending_x: list[torch.Tensor] = []
    pending_y: list[int] = []
    skipped = 0

    def flush():
        if not pending_x:
            return
        batch = torch.stack(pending_x).to(device)
        with torch.inference_mode():
            feats = model(batch)
        chunks.append(feats.cpu().numpy().astype(np.float32))
        labels.extend(pending_y)
        pending_x.clear()
        pending_y.clear()

    for path, label in items:
        img = decode_rgb(path)
        if img is None:
            skipped += 1
            continue
        pending_x.append(tf(img))
        pending_y.append(label)
        if len(pending_x) >= job.batch:
            flush()
    flush()

    if not labels:
        raise MissingDatasetError(
            f"no decodable images under {job.data_root}/{job.split} "
            f"({skipped} skipped)"
        )
    features = np.concatenate(chunks, axis=0)
    assert features.shape[1] == EMBED_DIM
    write_store_file(job.out, np.asarray(labels, dtype=np.int64), features,
                     num_classes=len(class_names))

    sidecar = {
        "model": "vit_b_16",
        "weights": weights_tag,
        "preprocess": PREPROCESS,
        "split": job.split,
        "classes": class_names,
        "n": len(labels),
        "d": EMBED_DIM,
        "skipped": skipped,
        "torch_threads": torch.get_num_threads(),
    }
    Path(str(job.out) + ".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if skipped:
        log.warning("skipped %d undecodable images", skipped)
    log.info("wrote %s: n=%d d=%d classes=%d", job.out, len(labels), EMBED_DIM,
             len(class_names))
    return ExportResult(n=len(labels), d=EMBED_DIM, num_classes=len(class_names),
                        skipped=skipped)
