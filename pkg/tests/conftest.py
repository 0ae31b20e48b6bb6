import pytest

from convoykit.geo import EnuPoint, GeoPoint, geodetic_from_enu
from convoykit.model import VehicleState

ORIGIN = GeoPoint(28.6024, -81.2001, 0.0)

ACCEPTANCE_RESULTS: list[str] = []


def make_state(vid=0, t_us=1_000_000, east=0.0, north=0.0, speed=0.0, heading=0.0, accel=0.0, seq=None, origin=ORIGIN):
    return VehicleState(
        vehicle_id=vid,
        timestamp_us=t_us,
        position=geodetic_from_enu(origin, EnuPoint(east, north, 0.0)),
        speed=speed,
        heading=heading,
        acceleration=accel,
        sequence=t_us // 1000 if seq is None else seq,
    )


@pytest.fixture
def state_factory():
    return make_state


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
