"""Optional per-frame metadata CSV parsing.

Recognized columns: id, route_m, lat, lon, timestamp_s, label, memorability.
Rows correspond one-to-one, in order, with the lexicographically sorted image
files. Positions come from route_m, or from lat/lon projected to local planar
meters about the track centroid; with neither, frame index in meters is used.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .geo import geo_to_local, track_centroid

_KNOWN_COLUMNS = {"id", "route_m", "lat", "lon", "timestamp_s", "label", "memorability"}


@dataclass(frozen=True)
class FrameMeta:
    id: str | None = None
    route_m: float | None = None
    lat: float | None = None
    lon: float | None = None
    timestamp_s: float | None = None
    label: str = "undefined"
    memorability: float | None = None


def _opt_float(row, key):
    value = row.get(key)
    if value is None or value == "":
        return None
    return float(value)


def read_metadata(csv_path) -> list:
    path = Path(csv_path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty metadata CSV")
        unknown = set(reader.fieldnames) - _KNOWN_COLUMNS
        if unknown:
            raise ValueError(
                f"{path}: unknown metadata columns {sorted(unknown)}; "
                f"expected a subset of {sorted(_KNOWN_COLUMNS)}"
            )
        rows = []
        for line_no, row in enumerate(reader):
            has_route = row.get("route_m") not in (None, "")
            has_lat = row.get("lat") not in (None, "")
            has_lon = row.get("lon") not in (None, "")
            if has_lat != has_lon:
                raise ValueError(f"{path} row {line_no}: lat and lon must come together")
            if has_route and has_lat:
                raise ValueError(f"{path} row {line_no}: give route_m or lat/lon, not both")
            rows.append(
                FrameMeta(
                    id=row.get("id") or None,
                    route_m=_opt_float(row, "route_m"),
                    lat=_opt_float(row, "lat"),
                    lon=_opt_float(row, "lon"),
                    timestamp_s=_opt_float(row, "timestamp_s"),
                    label=row.get("label") or "undefined",
                    memorability=_opt_float(row, "memorability"),
                )
            )
    if not rows:
        raise ValueError(f"{path}: metadata CSV has no rows")
    return rows


def resolve_positions(metadata) -> list:
    """Per-frame positions: route_m floats, or planar (x, y) from lat/lon."""
    styles = {
        "route" if m.route_m is not None else "geo" if m.lat is not None else "none"
        for m in metadata
    }
    if len(styles) != 1:
        raise ValueError(f"metadata mixes position styles: {sorted(styles)}")
    style = styles.pop()
    if style == "route":
        return [m.route_m for m in metadata]
    if style == "geo":
        origin = track_centroid((m.lat, m.lon) for m in metadata)
        return [geo_to_local(m.lat, m.lon, origin) for m in metadata]
    return [float(i) for i in range(len(metadata))]
