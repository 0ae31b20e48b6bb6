import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convoykit.errors import DegenerateGeometryError, InvalidInputError
from convoykit.geo import (
    TWO_PI,
    EnuPoint,
    GeoPoint,
    bearing_enu,
    enu_from_geodetic,
    geodetic_from_enu,
    radii_of_curvature,
    wrap_to_2pi,
    wrap_to_pi,
)


def haversine_oracle(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance on the sphere osculating the ellipsoid along the path azimuth."""
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dl = math.radians(b.longitude - a.longitude)
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    az = math.atan2(math.sin(dl) * math.cos(p2), math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl))
    m, n = radii_of_curvature((a.latitude + b.latitude) / 2)
    radius = 1.0 / (math.cos(az) ** 2 / m + math.sin(az) ** 2 / n)
    return 2 * radius * math.asin(math.sqrt(h))


UCF = GeoPoint(28.6024, -81.2001, 0.0)


def test_identity_is_exact_zero():
    assert enu_from_geodetic(UCF, UCF) == EnuPoint(0.0, 0.0, 0.0)


def test_small_north_step():
    p = GeoPoint(UCF.latitude + 1e-5, UCF.longitude, 0.0)
    e = enu_from_geodetic(UCF, p)
    assert 1.105 <= e.north <= 1.112
    assert abs(e.east) < 1e-9
    assert abs(e.north - haversine_oracle(UCF, p)) / haversine_oracle(UCF, p) < 1e-3


def test_small_east_step_at_equator():
    r = GeoPoint(0.0, 0.0, 0.0)
    p = GeoPoint(0.0, 1e-5, 0.0)
    e = enu_from_geodetic(r, p)
    assert e.east == pytest.approx(1.113, abs=5e-4)
    assert abs(e.north) < 1e-12
    assert abs(e.east - haversine_oracle(r, p)) / haversine_oracle(r, p) < 1e-3


@pytest.mark.parametrize("lat,lon", [(91, 0), (-90.5, 0), (0, 181), (0, -180.01), (math.nan, 0)])
def test_out_of_range_rejected(lat, lon):
    with pytest.raises(InvalidInputError):
        GeoPoint(lat, lon, 0.0)


def test_non_geopoint_rejected():
    with pytest.raises(InvalidInputError):
        enu_from_geodetic(UCF, (28.0, -81.0, 0.0))


def test_longitude_wrap_across_antimeridian():
    r = GeoPoint(10.0, 179.99999, 0.0)
    p = GeoPoint(10.0, -179.99999, 0.0)
    e = enu_from_geodetic(r, p)
    assert 0 < e.east < 3.0


lat_st = st.floats(-80, 80)
lon_st = st.floats(-179.9, 179.9)
off_st = st.floats(-7000, 7000)


@settings(max_examples=300, deadline=None)
@given(lat_st, lon_st, off_st, off_st, st.floats(-50, 50))
def test_round_trip_residual(lat, lon, de, dn, du):
    r = GeoPoint(lat, lon, 10.0)
    e = EnuPoint(de, dn, du)
    back = enu_from_geodetic(r, geodetic_from_enu(r, e))
    assert abs(back.east - de) < 1e-6
    assert abs(back.north - dn) < 1e-6
    assert abs(back.up - du) < 1e-6


@settings(max_examples=300, deadline=None)
@given(lat_st, lon_st, st.floats(-700, 700), st.floats(-700, 700))
def test_distance_agrees_with_haversine(lat, lon, de, dn):
    if math.hypot(de, dn) < 1.0:
        de, dn = de + 1.0, dn + 1.0
    r = GeoPoint(lat, lon, 0.0)
    p = geodetic_from_enu(r, EnuPoint(de, dn, 0.0))
    flat = enu_from_geodetic(r, p).horizontal_norm()
    oracle = haversine_oracle(r, p)
    assert abs(flat - oracle) / oracle < 1e-3


@pytest.mark.parametrize(
    "to,expected",
    [((0, 1), 0.0), ((1, 0), math.pi / 2), ((1, 1), math.pi / 4), ((0, -1), math.pi), ((-1, 0), 3 * math.pi / 2)],
)
def test_bearing_axes(to, expected):
    assert bearing_enu(EnuPoint(0, 0), EnuPoint(*to)) == pytest.approx(expected)


def test_bearing_from_north_of_target_is_south():
    assert bearing_enu(EnuPoint(3, 10), EnuPoint(3, 2)) == pytest.approx(math.pi)


def test_bearing_coincident_points():
    with pytest.raises(DegenerateGeometryError):
        bearing_enu(EnuPoint(1, 2, 0), EnuPoint(1, 2, 5))


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_bearing_range(de, dn):
    if de == 0 and dn == 0:
        return
    b = bearing_enu(EnuPoint(0, 0), EnuPoint(de, dn))
    assert 0.0 <= b < TWO_PI


@given(st.floats(-20, 20), st.integers(-5, 5))
def test_wrap_periodic(angle, k):
    a = wrap_to_2pi(angle)
    assert 0.0 <= a < TWO_PI
    shifted = wrap_to_2pi(angle + k * TWO_PI)
    assert abs(wrap_to_pi(shifted - a)) < 1e-9
    assert -math.pi < wrap_to_pi(angle) <= math.pi


def test_wrap_tiny_negative_stays_below_two_pi():
    assert wrap_to_2pi(-1e-17) < TWO_PI
