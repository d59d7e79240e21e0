"""Class-per-folder image dataset scanning and decoding."""

import logging
from pathlib import Path

from PIL import Image

from .errors import MissingDatasetError

log = logging.getLogger("fscil_exporter")

# anything Pillow might plausibly open; actual decodability is decided by
# attempting the decode, so this is only a filter against sidecar files
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


def scan_split(root, split: str) -> tuple[list[str], list[tuple[Path, int]]]:
    """Return (class_names, [(image_path, label), ...]).

    Labels are assigned by sorted folder name, stable across re-runs.
    """
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise MissingDatasetError(f"no {split!r} directory under {root}")
    class_dirs = sorted(p for p in split_dir.iterdir() if p.is_dir())
    if not class_dirs:
        raise MissingDatasetError(f"{split_dir} contains no class folders")
    class_names = [p.name for p in class_dirs]
    items = []
    for label, cdir in enumerate(class_dirs):
        for path in sorted(cdir.iterdir()):
            if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
                items.append((path, label))
    if not items:
        raise MissingDatasetError(f"{split_dir} contains no image files")
    return class_names, items


def decode_rgb(path: Path) -> Image.Image | None:
    """Open and fully decode one image; None (logged) if undecodable."""
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except Exception as exc:  # Pillow raises a zoo of types for bad files
        log.warning("skipping %s: %s", path, exc)
        return None
