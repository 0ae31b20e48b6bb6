"""Local East-North-Up plane on the WGS84 ellipsoid.

Convoy-scale distances are a few hundred meters at most, so a tangent-plane
approximation anchored at a fixed reference point is used instead of a full
ECEF round trip. Headings are radians clockwise from true north.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateGeometryError, InvalidInputError

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class GeoPoint:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.latitude) and -90.0 <= self.latitude <= 90.0):
            raise InvalidInputError(f"latitude out of range: {self.latitude!r}")
        if not (math.isfinite(self.longitude) and -180.0 <= self.longitude <= 180.0):
            raise InvalidInputError(f"longitude out of range: {self.longitude!r}")
        if not math.isfinite(self.altitude):
            raise InvalidInputError(f"altitude not finite: {self.altitude!r}")


@dataclass(frozen=True, slots=True)
class EnuPoint:
    east: float
    north: float
    up: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.east) and math.isfinite(self.north) and math.isfinite(self.up)):
            raise InvalidInputError(f"non-finite ENU point: {self!r}")

    def __sub__(self, other: EnuPoint) -> EnuPoint:
        return EnuPoint(self.east - other.east, self.north - other.north, self.up - other.up)

    def horizontal_norm(self) -> float:
        return math.hypot(self.east, self.north)


def wrap_to_2pi(angle: float) -> float:
    """Wrap to [0, 2*pi)."""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod of a tiny negative number can round back up to exactly 2*pi
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def wrap_to_pi(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = wrap_to_2pi(angle)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def radii_of_curvature(latitude_deg: float) -> tuple[float, float]:
    """Meridional (M) and prime-vertical (N) radii at a geodetic latitude."""
    s = math.sin(math.radians(latitude_deg))
    w2 = 1.0 - WGS84_E2 * s * s
    n = WGS84_A / math.sqrt(w2)
    m = WGS84_A * (1.0 - WGS84_E2) / (w2 * math.sqrt(w2))
    return m, n


def _check(point) -> None:
    if not isinstance(point, GeoPoint):
        raise InvalidInputError(f"expected GeoPoint, got {type(point).__name__}")


def _lon_delta_rad(lon: float, lon0: float) -> float:
    return wrap_to_pi(math.radians(lon - lon0))


def enu_from_geodetic(reference: GeoPoint, point: GeoPoint) -> EnuPoint:
    _check(reference)
    _check(point)
    m, n = radii_of_curvature(reference.latitude)
    h0 = reference.altitude
    north = math.radians(point.latitude - reference.latitude) * (m + h0)
    east = _lon_delta_rad(point.longitude, reference.longitude) * (n + h0) * math.cos(
        math.radians(reference.latitude)
    )
    return EnuPoint(east, north, point.altitude - h0)


def geodetic_from_enu(reference: GeoPoint, offset: EnuPoint) -> GeoPoint:
    """Inverse of :func:`enu_from_geodetic` for the same reference."""
    _check(reference)
    m, n = radii_of_curvature(reference.latitude)
    h0 = reference.altitude
    cos_lat = math.cos(math.radians(reference.latitude))
    if cos_lat < 1e-12:
        raise DegenerateGeometryError("tangent plane undefined at the poles")
    lat = reference.latitude + math.degrees(offset.north / (m + h0))
    lon = reference.longitude + math.degrees(offset.east / ((n + h0) * cos_lat))
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return GeoPoint(lat, lon, h0 + offset.up)


def bearing_enu(start: EnuPoint, end: EnuPoint) -> float:
    """Heading from ``start`` to ``end``: radians in [0, 2*pi), 0 = north, clockwise."""
    de = end.east - start.east
    dn = end.north - start.north
    if de == 0.0 and dn == 0.0:
        raise DegenerateGeometryError("bearing between coincident points")
    return wrap_to_2pi(math.atan2(de, dn))


def heading_unit(heading: float) -> tuple[float, float]:
    """(east, north) unit vector of a clockwise-from-north heading."""
    return math.sin(heading), math.cos(heading)
