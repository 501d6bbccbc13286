"""Traversal bundle writer, bit-conformant to the consumer's on-disk format.

Directory layout:

  manifest.jsonl   one JSON object per frame, in index order; keys id, index,
                   route_m OR pos_xy_m, timestamp_s (nullable), label,
                   memorability (nullable)
  descriptors.bin  magic "VMDS" | version u32 LE (1) | count u32 LE |
                   dim u32 LE | count*dim float32 LE, row-major

Validation mirrors the consumer's loader so anything written here loads there.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VMDS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_bundle(out_dir, frames, values: np.ndarray) -> Path:
    """frames: per-frame dicts with id, position, timestamp_s, label, memorability."""
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2 or values.shape[1] < 1:
        raise ValueError(f"descriptor matrix must be (count, dim >= 1), got {values.shape}")
    if len(frames) != values.shape[0]:
        raise ValueError(f"{len(frames)} frames but {values.shape[0]} descriptor rows")
    if len(frames) == 0:
        raise ValueError("refusing to write an empty bundle")
    if not np.all(np.isfinite(values)):
        raise ValueError("descriptor matrix has non-finite values")

    lines = []
    prev_route = None
    seen_ids = set()
    for index, frame in enumerate(frames):
        frame_id = str(frame["id"])
        if frame_id in seen_ids:
            raise ValueError(f"duplicate frame id {frame_id!r}")
        seen_ids.add(frame_id)
        position = frame["position"]
        record = {"id": frame_id, "index": index}
        if isinstance(position, (tuple, list)):
            record["pos_xy_m"] = [float(position[0]), float(position[1])]
        else:
            route = float(position)
            if prev_route is not None and route < prev_route:
                raise ValueError(
                    f"frame {index}: route_m decreases ({route} after {prev_route})"
                )
            prev_route = route
            record["route_m"] = route
        record["timestamp_s"] = frame.get("timestamp_s")
        record["label"] = str(frame.get("label") or "undefined")
        memorability = frame.get("memorability")
        if memorability is not None and not 0.0 <= float(memorability) <= 1.0:
            raise ValueError(f"frame {index}: memorability {memorability} outside [0, 1]")
        record["memorability"] = memorability
        lines.append(json.dumps(record, separators=(",", ":")))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, values.shape[0], values.shape[1])
    (out / "descriptors.bin").write_bytes(header + values.tobytes())
    return out
