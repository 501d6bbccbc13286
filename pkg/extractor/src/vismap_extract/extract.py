"""Image folder to traversal bundle."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbones import load_backbone
from .bundle import write_bundle
from .metadata import read_metadata, resolve_positions

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".bmp", ".gif", ".jpeg", ".jpg", ".png", ".ppm", ".tif", ".tiff", ".webp"}


@dataclass(frozen=True)
class ExtractorConfig:
    """Extraction settings.

    ``image_size`` defaults to the backbone's preferred input size. With
    ``fail_fast`` off, undecodable images are skipped with a warning (their
    metadata rows are dropped too, keeping alignment).
    """

    backbone: str = "tiny"
    image_size: int | None = None
    batch_size: int = 16
    metadata_csv: str | None = None
    fail_fast: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.image_size is not None and self.image_size < 8:
            raise ValueError(f"image_size must be >= 8, got {self.image_size}")


def list_images(images_dir) -> list:
    """Image files in lexicographic filename order (defines frame index)."""
    root = Path(images_dir)
    if not root.is_dir():
        raise ValueError(f"{root} is not a directory")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)


def _load_image(path, size) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32) / 255.0


def extract(images_dir, config: ExtractorConfig, out_dir) -> Path:
    """Embed every image and write a bundle; deterministic for fixed weights.

    Frame order (and index) is the lexicographic filename order; a metadata
    CSV, when given, must match that order row for row.
    """
    torch.set_num_threads(1)  # keep reductions bit-reproducible across runs
    backbone = load_backbone(config.backbone, config.image_size)
    paths = list_images(images_dir)
    if not paths:
        raise ValueError(f"no images with extensions {sorted(IMAGE_EXTENSIONS)} in {images_dir}")
    metadata = None
    if config.metadata_csv is not None:
        metadata = read_metadata(config.metadata_csv)
        if len(metadata) != len(paths):
            raise ValueError(
                f"metadata has {len(metadata)} rows but {len(paths)} images were found"
            )

    kept_paths = []
    kept_meta = []
    arrays = []
    for i, path in enumerate(paths):
        try:
            arrays.append(_load_image(path, backbone.image_size))
        except (UnidentifiedImageError, OSError) as exc:
            if config.fail_fast:
                raise ValueError(f"cannot decode {path}: {exc}") from exc
            logger.warning("skipping undecodable image %s: %s", path, exc)
            continue
        kept_paths.append(path)
        if metadata is not None:
            kept_meta.append(metadata[i])
    if not arrays:
        raise ValueError(f"no decodable images in {images_dir}")

    rows = []
    for start in range(0, len(arrays), config.batch_size):
        batch = np.stack(arrays[start : start + config.batch_size])
        rows.append(backbone.embed(batch))
    values = np.concatenate(rows, axis=0)

    if metadata is not None:
        positions = resolve_positions(kept_meta)
        frames = [
            {
                "id": meta.id or path.stem,
                "position": positions[i],
                "timestamp_s": meta.timestamp_s,
                "label": meta.label,
                "memorability": meta.memorability,
            }
            for i, (path, meta) in enumerate(zip(kept_paths, kept_meta))
        ]
    else:
        frames = [
            {
                "id": path.stem,
                "position": float(i),
                "timestamp_s": None,
                "label": "undefined",
                "memorability": None,
            }
            for i, path in enumerate(kept_paths)
        ]
    return write_bundle(out_dir, frames, values)
