"""Per-frame suitability signals: local pixel entropy and memorability biasing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image, pixels row-major with shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"image must be 2-D and non-empty, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "GrayImage":
        flat = np.asarray(values, dtype=np.uint8).ravel()
        if flat.size != width * height:
            raise ValidationError(
                f"expected {width * height} pixels for {width}x{height}, got {flat.size}"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def local_entropy_score(img: GrayImage, patch: int) -> float:
    """Mean normalized Shannon entropy over non-overlapping patch x patch tiles.

    Each tile's 256-bin intensity histogram yields an entropy in bits, divided
    by 8 (the maximum for 8-bit pixels); partial edge tiles are discarded. The
    result lies in [0, 1]: 0 for a constant image, approaching 1 for
    uniformly random pixels.
    """
    if patch < 1:
        raise ConfigError(f"patch must be >= 1, got {patch}")
    if patch > min(img.width, img.height):
        raise ConfigError(
            f"patch {patch} exceeds image extent {img.width}x{img.height}"
        )
    rows = img.height // patch
    cols = img.width // patch
    tiles = (
        img.pixels[: rows * patch, : cols * patch]
        .reshape(rows, patch, cols, patch)
        .swapaxes(1, 2)
        .reshape(rows * cols, patch * patch)
    )
    scores = []
    for tile in tiles:
        counts = np.bincount(tile, minlength=256)
        probs = counts[counts > 0] / tile.size
        bits = float(-(probs * np.log2(probs)).sum())
        scores.append(bits / 8.0)
    return math.fsum(scores) / len(scores)


def biased_confidence(score: float, memorability: float, b_mem: float) -> float:
    """Memorability-biased confidence: score * (1 + b_mem * memorability).

    ``b_mem`` is signed. A confidence score is a distance (lower is more
    confident), so a negative bias lets memorable frames pass a
    below-threshold check more easily; a positive bias penalizes them.
    """
    if score < 0:
        raise ValidationError(f"confidence score must be >= 0, got {score}")
    if not 0.0 <= memorability <= 1.0:
        raise ValidationError(f"memorability {memorability} outside [0, 1]")
    return score * (1.0 + b_mem * memorability)
