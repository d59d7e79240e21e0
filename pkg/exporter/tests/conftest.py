import numpy as np
import pytest
import torch
from PIL import Image
from torchvision.models import vit_b_16


@pytest.fixture(scope="session")
def checkpoint_path(tmp_path_factory):
    """A seeded, randomly initialized backbone saved as a state-dict file.

    Pretrained weights are not fetchable in the test environment; a fixed
    random backbone exercises the identical code path and keeps the
    determinism contract checkable.
    """
    torch.manual_seed(0)
    model = vit_b_16(weights=None)
    path = tmp_path_factory.mktemp("ckpt") / "vit_b_16_seed0.pt"
    torch.save(model.state_dict(), path)
    return path


def _write_image(path, seed, size=(40, 52)):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """train/: 2 classes x 3 images; test/: same classes x 1 image."""
    root = tmp_path_factory.mktemp("data")
    seed = 0
    for split, per_class in (("train", 3), ("test", 1)):
        for cname in ("finch", "wren"):  # sorted: finch=0, wren=1
            cdir = root / split / cname
            cdir.mkdir(parents=True)
            for i in range(per_class):
                _write_image(cdir / f"img_{i:02d}.png", seed)
                seed += 1
    return root
