"""Geographic coordinates to local planar meters.

Equirectangular projection about an origin (lat0, lon0):

    x = R * (lon - lon0) * pi/180 * cos(lat0 * pi/180)
    y = R * (lat - lat0) * pi/180

with R the mean earth radius. Adequate for route-scale extents (tens of km),
where the error against great-circle distances stays well under a percent.
The inverse exists away from the poles.
"""

from __future__ import annotations

import math

EARTH_RADIUS_M = 6371000.0


def geo_to_local(lat: float, lon: float, origin) -> tuple:
    """Project (lat, lon) degrees to (x_m, y_m) about origin = (lat0, lon0)."""
    lat0, lon0 = origin
    x = EARTH_RADIUS_M * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * math.radians(lat - lat0)
    return (x, y)


def local_to_geo(x_m: float, y_m: float, origin) -> tuple:
    """Inverse of geo_to_local; undefined at the poles (cos(lat0) = 0)."""
    lat0, lon0 = origin
    cos_lat0 = math.cos(math.radians(lat0))
    if abs(cos_lat0) < 1e-12:
        raise ValueError("local_to_geo is undefined at the poles")
    lat = lat0 + math.degrees(y_m / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(x_m / (EARTH_RADIUS_M * cos_lat0))
    return (lat, lon)


def track_centroid(coords) -> tuple:
    """Mean latitude and longitude of a coordinate sequence."""
    coords = list(coords)
    if not coords:
        raise ValueError("cannot take the centroid of an empty track")
    lat = sum(c[0] for c in coords) / len(coords)
    lon = sum(c[1] for c in coords) / len(coords)
    return (lat, lon)
