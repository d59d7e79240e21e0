"""Backbone loading: a pretrained vision transformer stripped of its
classification head, so the forward pass returns the final pre-classifier
token embedding (d=768 for the base/16 model)."""

import hashlib
from pathlib import Path

import torch
from torchvision.models import vit_b_16

from .errors import CheckpointMismatchError, ModelLoadFailureError

EMBED_DIM = 768

# torchvision's standard evaluation preprocessing for this family
PREPROCESS = {
    "resize": 256,
    "crop": 224,
    "interpolation": "bilinear",
    "mean": [0.485, 0.456, 0.406],
    "std": [0.229, 0.224, 0.225],
}


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_backbone(checkpoint=None) -> tuple[torch.nn.Module, str]:
    """Build the headless backbone.

    With `checkpoint`, loads a state-dict file (head weights, if present,
    are ignored — the head is discarded anyway). Without one, falls back to
    torchvision's pretrained weights, which requires a local cache or
    network access. Returns (model, weights_tag) where the tag lands in the
    sidecar metadata.
    """
    if checkpoint is not None:
        model = vit_b_16(weights=None)
        try:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise ModelLoadFailureError(f"cannot read checkpoint {checkpoint}: {exc}") from exc
        if not isinstance(state, dict):
            raise CheckpointMismatchError("checkpoint is not a state dict")
        state = {k: v for k, v in state.items() if not k.startswith("heads.")}
        model.heads = torch.nn.Identity()
        try:
            model.load_state_dict(state, strict=True)
        except RuntimeError as exc:
            raise CheckpointMismatchError(str(exc)) from exc
        tag = f"checkpoint:sha256:{_sha256_file(checkpoint)[:16]}"
    else:
        try:
            from torchvision.models import ViT_B_16_Weights
            model = vit_b_16(weights=ViT_B_16_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise ModelLoadFailureError(
                "pretrained weights unavailable (no cache, no network); "
                "pass --checkpoint with a state-dict file"
            ) from exc
        model.heads = torch.nn.Identity()
        tag = "torchvision:ViT_B_16/IMAGENET1K_V1"
    model.eval()
    return model, tag
