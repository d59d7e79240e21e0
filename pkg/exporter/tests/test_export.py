import json
import os
import struct
import subprocess
import sys

import numpy as np
import pytest
import torch

from fscil_exporter import (
    CheckpointMismatchError,
    ExportJob,
    MissingDatasetError,
    run_export,
    write_store_file,
)


def read_raw(path):
    raw = path.read_bytes()
    magic, version, n, d, ncls = struct.unpack_from("<4sIQII", raw, 0)
    assert magic == b"FSCF" and version == 1
    assert len(raw) == 24 + 8 * n + 4 * n * d
    labels = np.frombuffer(raw, dtype="<i8", count=n, offset=24)
    feats = np.frombuffer(raw, dtype="<f4", count=n * d, offset=24 + 8 * n)
    return labels, feats.reshape(n, d), ncls


@pytest.fixture(scope="session")
def exported(tiny_dataset, checkpoint_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("out") / "train.fscf"
    result = run_export(ExportJob(
        data_root=str(tiny_dataset), split="train", out=str(out),
        checkpoint=str(checkpoint_path), batch=4,
    ))
    return out, result


def test_structural_contract(exported):
    out, result = exported
    assert (result.n, result.d, result.num_classes) == (6, 768, 2)
    assert result.skipped == 0
    labels, feats, ncls = read_raw(out)
    assert ncls == 2
    np.testing.assert_array_equal(labels, [0, 0, 0, 1, 1, 1])
    assert feats.shape == (6, 768)
    assert np.isfinite(feats).all()
    # rows differ image to image: the model actually saw six inputs
    assert len({feats[i].tobytes() for i in range(6)}) == 6


def test_primary_cli_accepts_the_file(exported):
    out, _ = exported
    res = subprocess.run(
        [sys.executable, "-m", "fscil", "-q", "inspect", str(out)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert "n=6" in res.stdout and "d=768" in res.stdout and "classes=2" in res.stdout


def test_sidecar_records_preprocessing(exported):
    out, _ = exported
    meta = json.loads((out.parent / (out.name + ".meta.json")).read_text())
    assert meta["model"] == "vit_b_16"
    assert meta["weights"].startswith("checkpoint:sha256:")
    assert meta["preprocess"]["crop"] == 224
    assert meta["classes"] == ["finch", "wren"]
    assert meta["n"] == 6 and meta["d"] == 768


def test_repeat_export_is_byte_identical(tiny_dataset, checkpoint_path, tmp_path, exported):
    first, _ = exported
    again = tmp_path / "again.fscf"
    run_export(ExportJob(data_root=str(tiny_dataset), split="train",
                         out=str(again), checkpoint=str(checkpoint_path), batch=4))
    assert again.read_bytes() == first.read_bytes()


def test_batch_size_does_not_change_rows_meaningfully(tiny_dataset, checkpoint_path,
                                                      tmp_path, exported):
    """Different batching may change float tie-breaking, never content."""
    out, _ = exported
    other = tmp_path / "b2.fscf"
    run_export(ExportJob(data_root=str(tiny_dataset), split="train",
                         out=str(other), checkpoint=str(checkpoint_path), batch=2))
    la, fa, _ = read_raw(out)
    lb, fb, _ = read_raw(other)
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_allclose(fa, fb, atol=1e-4, rtol=1e-4)


def test_test_split_export(tiny_dataset, checkpoint_path, tmp_path):
    out = tmp_path / "test.fscf"
    result = run_export(ExportJob(data_root=str(tiny_dataset), split="test",
                                  out=str(out), checkpoint=str(checkpoint_path)))
    assert (result.n, result.num_classes) == (2, 2)
    labels, _, _ = read_raw(out)
    np.testing.assert_array_equal(labels, [0, 1])


def test_undecodable_images_are_skipped(tiny_dataset, checkpoint_path, tmp_path):
    import shutil
    root = tmp_path / "data"
    shutil.copytree(tiny_dataset, root)
    (root / "train" / "finch" / "broken.png").write_bytes(b"not an image at all")
    out = tmp_path / "skip.fscf"
    result = run_export(ExportJob(data_root=str(root), split="train",
                                  out=str(out), checkpoint=str(checkpoint_path)))
    assert result.skipped == 1
    assert result.n == 6  # the six good images still export


def test_missing_dataset_errors(checkpoint_path, tmp_path):
    with pytest.raises(MissingDatasetError):
        run_export(ExportJob(data_root=str(tmp_path / "nowhere"), split="train",
                             out=str(tmp_path / "x.fscf"),
                             checkpoint=str(checkpoint_path)))
    empty = tmp_path / "empty"
    (empty / "train").mkdir(parents=True)
    with pytest.raises(MissingDatasetError):
        run_export(ExportJob(data_root=str(empty), split="train",
                             out=str(tmp_path / "y.fscf"),
                             checkpoint=str(checkpoint_path)))


def test_mismatched_checkpoint_rejected(tiny_dataset, tmp_path):
    bad = tmp_path / "bad.pt"
    torch.save({"encoder.layers.encoder_layer_0.ln_1.weight": torch.zeros(3)}, bad)
    with pytest.raises(CheckpointMismatchError):
        run_export(ExportJob(data_root=str(tiny_dataset), split="train",
                             out=str(tmp_path / "z.fscf"), checkpoint=str(bad)))


def test_writer_validates_inputs(tmp_path):
    feats = np.zeros((2, 3), dtype=np.float32)
    with pytest.raises(ValueError):
        write_store_file(tmp_path / "a.fscf", np.array([0]), feats, num_classes=1)
    with pytest.raises(ValueError):
        write_store_file(tmp_path / "b.fscf", np.array([0, 5]), feats, num_classes=2)
    bad = feats.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        write_store_file(tmp_path / "c.fscf", np.array([0, 1]), bad, num_classes=2)


def test_cli_end_to_end(tiny_dataset, checkpoint_path, tmp_path):
    out = tmp_path / "cli.fscf"
    res = subprocess.run(
        [sys.executable, "-m", "fscil_exporter", "-q", "export",
         "--data", str(tiny_dataset), "--split", "train",
         "--out", str(out), "--checkpoint", str(checkpoint_path), "--batch", "3"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert "n=6 d=768 classes=2" in res.stdout
    assert out.exists()

    res = subprocess.run(
        [sys.executable, "-m", "fscil_exporter", "-q", "export",
         "--data", str(tmp_path / "missing"), "--split", "train",
         "--out", str(tmp_path / "no.fscf"), "--checkpoint", str(checkpoint_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 1
    assert res.stderr.strip().splitlines()[-1].startswith("error: MissingDatasetError")


CUB_DIR = os.environ.get("CUB_DIR")


@pytest.mark.skipif(not CUB_DIR, reason="set CUB_DIR to a CUB-200 class-per-folder root")
def test_cub200_train_row_count(tmp_path):
    out = tmp_path / "cub_train.fscf"
    result = run_export(ExportJob(data_root=CUB_DIR, split="train", out=str(out),
                                  checkpoint=os.environ.get("CUB_CHECKPOINT")))
    assert result.d == 768
    assert result.n == 5994
