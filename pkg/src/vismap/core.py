"""Domain types shared by every other module, plus descriptor distance arithmetic.

Distance accumulation uses exactly rounded float64 summation (``math.fsum``),
so results do not depend on member ordering and are reproducible bit for bit
by any independent implementation that also sums exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import DimensionMismatch, MissingReference, ValidationError

UNDEFINED_LABEL = "undefined"

# Either a 1-D route distance in meters or 2-D planar coordinates in meters.
Position = Union[float, tuple]


def position_distance(a: Position, b: Position) -> float:
    """Meters between two frame positions: |delta route| in 1-D, planar Euclidean in 2-D."""
    a_planar = isinstance(a, tuple)
    b_planar = isinstance(b, tuple)
    if a_planar != b_planar:
        raise ValidationError("cannot mix 1-D route and 2-D planar positions")
    if a_planar:
        return math.hypot(a[0] - b[0], a[1] - b[1])
    return abs(float(a) - float(b))


def position_midpoint(a: Position, b: Position) -> Position:
    if isinstance(a, tuple):
        return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)
    return (float(a) + float(b)) / 2.0


@dataclass(frozen=True)
class Frame:
    """Per-image metadata for one position in a traversal.

    ``position`` is either a route distance in meters (float) or planar
    (x, y) coordinates in meters (2-tuple); a traversal uses exactly one
    variant throughout. ``label`` uses the reserved name "undefined" for
    frames that belong to no scene class.
    """

    id: str
    index: int
    position: Position
    timestamp: float | None = None
    label: str = UNDEFINED_LABEL
    memorability: float | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("frame id must be a non-empty string")
        if self.index < 0:
            raise ValidationError(f"frame index must be >= 0, got {self.index}")
        if isinstance(self.position, (tuple, list)):
            if len(self.position) != 2:
                raise ValidationError(
                    f"2-D position must have exactly 2 coordinates, got {len(self.position)}"
                )
            object.__setattr__(
                self, "position", (float(self.position[0]), float(self.position[1]))
            )
        else:
            object.__setattr__(self, "position", float(self.position))
        if not self.label:
            raise ValidationError(f"frame {self.id}: label must be non-empty")
        if self.memorability is not None:
            mem = float(self.memorability)
            if not 0.0 <= mem <= 1.0:
                raise ValidationError(
                    f"frame {self.id}: memorability {mem} outside [0, 1]"
                )
            object.__setattr__(self, "memorability", mem)

    @property
    def is_scene(self) -> bool:
        return self.label != UNDEFINED_LABEL


class DescriptorMatrix:
    """Dense count x dim matrix of 32-bit float embeddings, row i = frame index i.

    The backing array is made read-only; instances are safe to share across
    concurrent workers.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.ascontiguousarray(np.asarray(values, dtype=np.float32))
        if arr.ndim != 2:
            raise ValidationError(f"descriptor matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValidationError("descriptor dimensionality must be >= 1")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(
                f"descriptor matrix has a non-finite value at row {bad[0]}, column {bad[1]}"
            )
        arr.setflags(write=False)
        self.values = arr

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def row(self, index: int) -> np.ndarray:
        return self.values[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DescriptorMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(
            self.values, other.values
        )

    def __repr__(self) -> str:
        return f"DescriptorMatrix(count={self.count}, dim={self.dim})"


@dataclass(frozen=True)
class Traversal:
    """One pass through a route: ordered frames with an index-aligned descriptor matrix."""

    name: str
    frames: tuple
    descriptors: DescriptorMatrix

    def __post_init__(self):
        if not self.name:
            raise ValidationError("traversal name must be non-empty")
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.descriptors.count != len(self.frames):
            raise ValidationError(
                f"traversal {self.name}: {len(self.frames)} frames but "
                f"{self.descriptors.count} descriptor rows"
            )
        planar = None
        prev_route = None
        seen_ids = set()
        for i, fr in enumerate(self.frames):
            if fr.index != i:
                raise ValidationError(
                    f"traversal {self.name}: frame at slot {i} has index {fr.index}; "
                    "indices must be consecutive from 0"
                )
            if fr.id in seen_ids:
                raise ValidationError(f"traversal {self.name}: duplicate frame id {fr.id!r}")
            seen_ids.add(fr.id)
            is_planar = isinstance(fr.position, tuple)
            if planar is None:
                planar = is_planar
            elif is_planar != planar:
                raise ValidationError(
                    f"traversal {self.name}: frame {i} mixes position variants"
                )
            if not is_planar:
                if prev_route is not None and fr.position < prev_route:
                    raise ValidationError(
                        f"traversal {self.name}: route position decreases at frame {i} "
                        f"({fr.position} < {prev_route})"
                    )
                prev_route = fr.position

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int:
        return self.descriptors.dim

    @property
    def is_planar(self) -> bool:
        return bool(self.frames) and isinstance(self.frames[0].position, tuple)

    def positions(self) -> np.ndarray:
        """Positions as float64 array, shape (n,) for 1-D routes or (n, 2) for planar."""
        return np.array([fr.position for fr in self.frames], dtype=np.float64)

    def labels(self) -> list:
        return [fr.label for fr in self.frames]

    def scene_indices(self) -> list:
        return [fr.index for fr in self.frames if fr.is_scene]

    def has_memorability(self) -> bool:
        return all(fr.memorability is not None for fr in self.frames)


@dataclass(frozen=True)
class SceneGallery:
    """A named scene class with its reference descriptor rows.

    Members are (traversal name, frame index) references into a DescriptorStore.
    """

    class_name: str
    member_rows: tuple

    def __post_init__(self):
        if not self.class_name:
            raise ValidationError("gallery class_name must be non-empty")
        members = tuple((str(t), int(i)) for t, i in self.member_rows)
        object.__setattr__(self, "member_rows", members)
        if not members:
            raise ValidationError(f"gallery {self.class_name!r} has no members")
        if len(set(members)) != len(members):
            raise ValidationError(f"gallery {self.class_name!r} has duplicate references")

    @classmethod
    def from_indices(cls, class_name: str, traversal_name: str, indices: Iterable[int]):
        return cls(class_name, tuple((traversal_name, int(i)) for i in indices))

    def __len__(self) -> int:
        return len(self.member_rows)


class DescriptorStore:
    """Resolves gallery (traversal, frame index) references to descriptor rows."""

    def __init__(self):
        self._matrices = {}
        self._dim = None

    @classmethod
    def from_traversals(cls, *traversals: Traversal) -> "DescriptorStore":
        store = cls()
        for t in traversals:
            store.add(t)
        return store

    def add(self, traversal: Traversal) -> None:
        if traversal.name in self._matrices:
            raise ValidationError(f"store already holds a traversal named {traversal.name!r}")
        if self._dim is not None and traversal.dim != self._dim:
            raise DimensionMismatch(
                f"store dimensionality is {self._dim} but traversal "
                f"{traversal.name!r} has dim {traversal.dim}"
            )
        self._matrices[traversal.name] = traversal.descriptors
        self._dim = traversal.dim

    @property
    def dim(self) -> int | None:
        return self._dim

    def row(self, traversal_name: str, index: int) -> np.ndarray:
        matrix = self._matrices.get(traversal_name)
        if matrix is None or not 0 <= index < matrix.count:
            raise MissingReference(
                f"cannot resolve descriptor reference ({traversal_name!r}, {index})"
            )
        return matrix.row(index)

    def resolve(self, gallery: SceneGallery) -> np.ndarray:
        """All member rows of a gallery as one (n_members, dim) float64 matrix."""
        missing = []
        rows = []
        for name, idx in gallery.member_rows:
            matrix = self._matrices.get(name)
            if matrix is None or not 0 <= idx < matrix.count:
                missing.append((name, idx))
            else:
                rows.append(matrix.row(idx))
        if missing:
            raise MissingReference(
                f"gallery {gallery.class_name!r} has unresolvable references: {missing}"
            )
        return np.asarray(rows, dtype=np.float64)


def _as_float64_vector(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError("descriptor vector has non-finite values")
    return arr


def euclidean_distance(a, b) -> float:
    """L2 norm of (a - b), accumulated exactly in float64."""
    av = _as_float64_vector(a)
    bv = _as_float64_vector(b)
    if av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(
            f"descriptor dimensions differ: {av.shape[0]} vs {bv.shape[0]}"
        )
    diff = av - bv
    return math.sqrt(math.fsum(diff * diff))


def mean_distance_to_rows(query64: np.ndarray, rows64: np.ndarray) -> float:
    """Mean Euclidean distance from a float64 query to each row of a float64 matrix.

    Shared by mean_gallery_distance and the classifier so both produce
    bit-identical scores.
    """
    diffs = rows64 - query64
    sq = diffs * diffs
    dists = [math.sqrt(math.fsum(row)) for row in sq]
    return math.fsum(dists) / len(dists)


def mean_gallery_distance(query, gallery: SceneGallery, store: DescriptorStore) -> float:
    """Arithmetic mean of euclidean_distance(query, member) over all gallery members."""
    rows = store.resolve(gallery)
    q = _as_float64_vector(query)
    if q.shape[0] != rows.shape[1]:
        raise DimensionMismatch(
            f"descriptor dimensions differ: {q.shape[0]} vs {rows.shape[1]}"
        )
    return mean_distance_to_rows(q, rows)
