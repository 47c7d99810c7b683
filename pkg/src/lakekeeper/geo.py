"""Local tangent-plane geometry.

Positions on the lake live in a local east/north/down frame anchored at a
geographic origin. The projection is equirectangular with the scale factor
frozen at the origin latitude, which is plenty for a working area a couple of
kilometres across: the linearization error stays far below the sonar noise.

Functions
---------
project / unproject   geographic <-> local frame (exact algebraic inverses)
normalize_heading     wrap an angle to (-pi, pi]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

EARTH_RADIUS_M = 6371000.0


def normalize_heading(angle: float) -> float:
    """Wrap an angle in radians to the interval (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class GeoOrigin:
    """Anchor of the local frame, decimal degrees WGS-ish sphere."""

    lat0: float
    lon0: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat0 <= 90.0) or not (-180.0 <= self.lon0 <= 180.0):
            raise DomainError(f"origin out of range: lat={self.lat0} lon={self.lon0}")


@dataclass(frozen=True)
class EnuPoint:
    """Point in the local frame: east/north in metres, down positive below surface."""

    east: float
    north: float
    down: float = 0.0

    def offset(self, de: float, dn: float) -> "EnuPoint":
        return EnuPoint(self.east + de, self.north + dn, self.down)

    def distance_to(self, other: "EnuPoint") -> float:
        return math.hypot(self.east - other.east, self.north - other.north)


@dataclass
class Pose2D:
    """Vehicle pose: position plus heading in radians, CCW from east."""

    position: EnuPoint
    heading: float = 0.0

    def __post_init__(self) -> None:
        self.heading = normalize_heading(self.heading)


def project(lat: float, lon: float, origin: GeoOrigin) -> EnuPoint:
    """Project geographic coordinates into the local east/north frame."""
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise DomainError(f"coordinates out of range: lat={lat} lon={lon}")
    scale = math.pi / 180.0 * EARTH_RADIUS_M
    east = (lon - origin.lon0) * math.cos(math.radians(origin.lat0)) * scale
    north = (lat - origin.lat0) * scale
    return EnuPoint(east, north)


def unproject(point: EnuPoint, origin: GeoOrigin) -> tuple[float, float]:
    """Invert :func:`project`. Returns (lat, lon) in decimal degrees."""
    scale = math.pi / 180.0 * EARTH_RADIUS_M
    lat = origin.lat0 + point.north / scale
    lon = origin.lon0 + point.east / (scale * math.cos(math.radians(origin.lat0)))
    return lat, lon
