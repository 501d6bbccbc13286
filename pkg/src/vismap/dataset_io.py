"""On-disk traversal bundles and a deterministic synthetic traversal generator.

A bundle is a directory with two files:

  manifest.jsonl   one JSON object per frame, in index order; keys are
                   id, index, route_m OR pos_xy_m, timestamp_s (nullable),
                   label, memorability (nullable)
  descriptors.bin  magic "VMDS" (4 ASCII bytes), format version u32 LE (1),
                   count u32 LE, dim u32 LE, then count*dim IEEE-754 float32
                   LE values, row-major, row i = frame index i

The loader rejects malformed input rather than repairing it; every failure
names the offending file, line, or byte offset.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import UNDEFINED_LABEL, DescriptorMatrix, Frame, Traversal
from .errors import BundleFormatError, ValidationError

MAGIC = b"VMDS"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
DESCRIPTORS_NAME = "descriptors.bin"
_HEADER = struct.Struct("<4sIII")


def write_traversal(traversal: Traversal, path) -> None:
    """Write a bundle; load_traversal(write_traversal(t)) reproduces t bit-exactly."""
    if len(traversal) == 0:
        raise BundleFormatError("empty traversal rejected")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lines = []
        for fr in traversal.frames:
            record = {"id": fr.id, "index": fr.index}
            if isinstance(fr.position, tuple):
                record["pos_xy_m"] = [fr.position[0], fr.position[1]]
            else:
                record["route_m"] = fr.position
            record["timestamp_s"] = fr.timestamp
            record["label"] = fr.label
            record["memorability"] = fr.memorability
            lines.append(json.dumps(record, separators=(",", ":")))
        (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
        header = _HEADER.pack(
            MAGIC, FORMAT_VERSION, traversal.descriptors.count, traversal.descriptors.dim
        )
        payload = np.ascontiguousarray(traversal.descriptors.values, dtype="<f4").tobytes()
        (out / DESCRIPTORS_NAME).write_bytes(header + payload)
    except OSError as exc:
        raise BundleFormatError(f"cannot write bundle at {out}: {exc}") from exc


def _read_descriptors(bin_path: Path) -> np.ndarray:
    try:
        blob = bin_path.read_bytes()
    except OSError as exc:
        raise BundleFormatError(f"cannot read {bin_path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise BundleFormatError(
            f"{bin_path}: truncated header ({len(blob)} bytes, need {_HEADER.size})"
        )
    magic, version, count, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BundleFormatError(f"{bin_path}: bad magic {magic!r} at offset 0")
    if version != FORMAT_VERSION:
        raise BundleFormatError(
            f"{bin_path}: unsupported format version {version} (expected {FORMAT_VERSION})"
        )
    if count == 0:
        raise BundleFormatError(f"{bin_path}: empty traversal rejected (count=0)")
    if dim < 1:
        raise BundleFormatError(f"{bin_path}: descriptor dim must be >= 1, header says {dim}")
    expected = _HEADER.size + count * dim * 4
    if len(blob) != expected:
        raise BundleFormatError(
            f"{bin_path}: payload size mismatch, header implies {expected} bytes "
            f"but file has {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    finite = np.isfinite(values)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise BundleFormatError(
            f"{bin_path}: non-finite descriptor at row {row}, column {col}"
        )
    return values.copy()


def _parse_manifest_line(line_no: int, raw: str, manifest_path: Path):
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"{manifest_path} line {line_no}: invalid JSON ({exc})") from exc
    if not isinstance(record, dict):
        raise BundleFormatError(f"{manifest_path} line {line_no}: expected a JSON object")
    for key in ("id", "index", "label"):
        if key not in record:
            raise BundleFormatError(f"{manifest_path} line {line_no}: missing key {key!r}")
    has_route = "route_m" in record and record["route_m"] is not None
    has_planar = "pos_xy_m" in record and record["pos_xy_m"] is not None
    if has_route == has_planar:
        raise BundleFormatError(
            f"{manifest_path} line {line_no}: exactly one of route_m / pos_xy_m required"
        )
    if record["index"] != line_no:
        raise BundleFormatError(
            f"{manifest_path} line {line_no}: index {record['index']} out of order "
            f"(expected {line_no})"
        )
    mem = record.get("memorability")
    if mem is not None and not 0.0 <= float(mem) <= 1.0:
        raise BundleFormatError(
            f"{manifest_path} line {line_no}: memorability {mem} outside [0, 1]"
        )
    position = tuple(record["pos_xy_m"]) if has_planar else float(record["route_m"])
    return Frame(
        id=str(record["id"]),
        index=int(record["index"]),
        position=position,
        timestamp=None if record.get("timestamp_s") is None else float(record["timestamp_s"]),
        label=str(record["label"]),
        memorability=None if mem is None else float(mem),
    )


def load_traversal(path, name: str | None = None) -> Traversal:
    """Load and validate a bundle directory into an index-aligned Traversal."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    bin_path = root / DESCRIPTORS_NAME
    for required in (manifest_path, bin_path):
        if not required.is_file():
            raise BundleFormatError(f"bundle at {root} is missing {required.name}")
    values = _read_descriptors(bin_path)
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleFormatError(f"cannot read {manifest_path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != values.shape[0]:
        raise BundleFormatError(
            f"count mismatch: {manifest_path} has {len(lines)} frames but binary "
            f"header says {values.shape[0]}"
        )
    frames = []
    planar = None
    prev_route = None
    for line_no, raw in enumerate(lines):
        fr = _parse_manifest_line(line_no, raw, manifest_path)
        is_planar = isinstance(fr.position, tuple)
        if planar is None:
            planar = is_planar
        elif is_planar != planar:
            raise BundleFormatError(
                f"{manifest_path} line {line_no}: position variant differs from line 0"
            )
        if not is_planar:
            if prev_route is not None and fr.position < prev_route:
                raise BundleFormatError(
                    f"{manifest_path} line {line_no}: non-monotonic route_m "
                    f"({fr.position} after {prev_route})"
                )
            prev_route = fr.position
        frames.append(fr)
    try:
        return Traversal(
            name=name or root.name, frames=tuple(frames), descriptors=DescriptorMatrix(values)
        )
    except ValidationError as exc:
        raise BundleFormatError(f"bundle at {root} is inconsistent: {exc}") from exc


@dataclass(frozen=True)
class ClassSpec:
    """One synthetic scene class: a name plus the seed its cluster mean derives from."""

    name: str
    mean_seed: int

    def __post_init__(self):
        if not self.name or self.name == UNDEFINED_LABEL:
            raise ValidationError(
                f"class name must be non-empty and not {UNDEFINED_LABEL!r}, got {self.name!r}"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the synthetic traversal generator.

    Scene classes appear as contiguous runs separated by blocks of undefined
    frames, matching how real scenes occur along a route. Class cluster means
    are mutually orthogonal directions scaled by separation * sigma (the
    undefined cluster sits at the origin), so any separation factor s yields
    pairwise mean distances >= s * sigma by construction.

    Everything that describes the route itself derives from ``route_seed``
    and is shared by every traversal generated with it: the layout, the
    per-frame memorability scores (memorability is a property of the place),
    and the optional place signatures. Per-traversal observation noise
    derives from ``seed`` alone.

    ``place_scale`` adds a per-index signature vector to each descriptor,
    giving frames a stable place identity across traversals;
    ``place_smooth_frames`` box-averages the signatures over that many
    consecutive frames (variance preserved), so nearby places resemble each
    other the way real imagery does. ``noise_mem_coupling`` inflates
    descriptor noise for low-memorability frames by
    (1 + coupling * (1 - memorability)), so memorability carries signal
    about how re-observable a frame is. All three default to off.
    """

    classes: tuple
    frames_per_class: int
    undefined_frames: int
    dim: int = 16
    sigma: float = 1.0
    separation: float = 5.0
    spacing_m: float = 10.0
    mem_low: float = 0.05
    mem_high: float = 0.95
    place_scale: float = 0.0
    place_smooth_frames: int = 1
    noise_mem_coupling: float = 0.0
    route_seed: int = 0
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(
            self,
            "classes",
            tuple(c if isinstance(c, ClassSpec) else ClassSpec(**c) for c in self.classes),
        )
        if not self.classes:
            raise ValidationError("need at least one scene class")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate class names in {names}")
        if self.frames_per_class < 1:
            raise ValidationError("frames_per_class must be >= 1")
        if self.undefined_frames < 0:
            raise ValidationError("undefined_frames must be >= 0")
        if self.dim < max(1, len(self.classes)):
            raise ValidationError(
                f"dim must be >= number of classes ({len(self.classes)}) so cluster "
                f"means can be mutually orthogonal, got {self.dim}"
            )
        if self.sigma <= 0:
            raise ValidationError("sigma must be > 0")
        if self.spacing_m <= 0:
            raise ValidationError("spacing_m must be > 0")
        if self.separation < 0:
            raise ValidationError("separation must be >= 0")
        if not 0.0 <= self.mem_low <= self.mem_high <= 1.0:
            raise ValidationError(
                f"memorability range [{self.mem_low}, {self.mem_high}] must sit inside [0, 1]"
            )
        if self.place_scale < 0 or self.noise_mem_coupling < 0:
            raise ValidationError("place_scale and noise_mem_coupling must be >= 0")
        if self.place_smooth_frames < 1:
            raise ValidationError("place_smooth_frames must be >= 1")

    @property
    def total_frames(self) -> int:
        return len(self.classes) * self.frames_per_class + self.undefined_frames

    def to_json_dict(self) -> dict:
        return {
            "classes": [{"name": c.name, "mean_seed": c.mean_seed} for c in self.classes],
            "frames_per_class": self.frames_per_class,
            "undefined_frames": self.undefined_frames,
            "dim": self.dim,
            "sigma": self.sigma,
            "separation": self.separation,
            "spacing_m": self.spacing_m,
            "mem_low": self.mem_low,
            "mem_high": self.mem_high,
            "place_scale": self.place_scale,
            "place_smooth_frames": self.place_smooth_frames,
            "noise_mem_coupling": self.noise_mem_coupling,
            "route_seed": self.route_seed,
            "seed": self.seed,
            "name": self.name,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SyntheticSpec":
        try:
            known = dict(data)
            classes = tuple(
                ClassSpec(c["name"], int(c["mean_seed"])) for c in known.pop("classes")
            )
            return cls(classes=classes, **known)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed synthetic spec: {exc}") from exc

    def with_seed(self, seed: int) -> "SyntheticSpec":
        """Same route and clusters, fresh noise draws."""
        return replace(self, seed=seed)


def class_means(spec: SyntheticSpec) -> dict:
    """Cluster mean per class name; mutually orthogonal, norm separation * sigma."""
    draws = np.stack(
        [np.random.default_rng(c.mean_seed).standard_normal(spec.dim) for c in spec.classes]
    )
    q, _ = np.linalg.qr(draws.T)
    scale = spec.separation * spec.sigma
    return {c.name: scale * q[:, k] for k, c in enumerate(spec.classes)}


def _label_sequence(spec: SyntheticSpec) -> list:
    """Contiguous class runs separated by blocks of undefined frames."""
    n_blocks = len(spec.classes) + 1
    base, extra = divmod(spec.undefined_frames, n_blocks)
    block_sizes = [base + (1 if b < extra else 0) for b in range(n_blocks)]
    labels = []
    for k, cls in enumerate(spec.classes):
        labels.extend([UNDEFINED_LABEL] * block_sizes[k])
        labels.extend([cls.name] * spec.frames_per_class)
    labels.extend([UNDEFINED_LABEL] * block_sizes[-1])
    return labels


def generate_synthetic(spec: SyntheticSpec) -> Traversal:
    """Deterministic synthetic traversal: same spec, byte-identical output."""
    labels = _label_sequence(spec)
    n = len(labels)
    means = class_means(spec)
    origin = np.zeros(spec.dim)

    route_rng = np.random.default_rng(spec.route_seed)
    mems = route_rng.uniform(spec.mem_low, spec.mem_high, size=n)
    place = np.zeros((n, spec.dim))
    if spec.place_scale > 0:
        w = spec.place_smooth_frames
        white = route_rng.standard_normal((n + w - 1, spec.dim))
        if w > 1:
            kernel = np.ones(w) / np.sqrt(w)
            white = np.stack(
                [np.convolve(white[:, d], kernel, mode="valid") for d in range(spec.dim)],
                axis=1,
            )
        place = spec.place_scale * white
    noise = np.random.default_rng(spec.seed).standard_normal((n, spec.dim))

    noise_scale = spec.sigma * (1.0 + spec.noise_mem_coupling * (1.0 - mems))
    values = np.empty((n, spec.dim), dtype=np.float64)
    for i, label in enumerate(labels):
        mean = means.get(label, origin)
        values[i] = mean + place[i] + noise_scale[i] * noise[i]

    frames = tuple(
        Frame(
            id=f"{spec.name}-{i:05d}",
            index=i,
            position=i * spec.spacing_m,
            timestamp=float(i),
            label=labels[i],
            memorability=float(mems[i]),
        )
        for i in range(n)
    )
    return Traversal(name=spec.name, frames=frames, descriptors=DescriptorMatrix(values))
