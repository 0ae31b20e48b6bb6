"""Fixed-layout binary encoding of a vehicle state broadcast.

Layout (big-endian, 68 octets)::

    0   4s  magic "OCVY"
    4   B   version (1)
    5   B   vehicle_id
    6   H   flags (reserved, 0)
    8   I   sequence
    12  Q   timestamp, microseconds since epoch
    20  6d  latitude_deg, longitude_deg, altitude_m, speed_mps, heading_rad, accel_mps2
"""

from __future__ import annotations

import math
import struct

from ..errors import EncodeError, ForeignFrameError, InvalidInputError, MalformedFrameError
from ..geo import GeoPoint
from ..model import VehicleState

MAGIC = b"OCVY"
VERSION = 1
FRAME = struct.Struct(">4sBBHIQ6d")
FRAME_SIZE = FRAME.size

assert FRAME_SIZE == 68


def encode_bsm(state: VehicleState) -> bytes:
    pos = state.position
    floats = (pos.latitude, pos.longitude, pos.altitude, state.speed, state.heading, state.acceleration)
    if not all(math.isfinite(x) for x in floats):
        raise EncodeError(f"non-finite field in state of vehicle {state.vehicle_id}")
    try:
        return FRAME.pack(MAGIC, VERSION, state.vehicle_id, 0, state.sequence, state.timestamp_us, *floats)
    except struct.error as exc:
        raise EncodeError(str(exc)) from exc


def decode_bsm(data: bytes) -> VehicleState:
    if len(data) != FRAME_SIZE:
        raise MalformedFrameError(f"frame length {len(data)}, expected {FRAME_SIZE}")
    magic, version, vid, _flags, seq, ts, lat, lon, alt, speed, heading, accel = FRAME.unpack(data)
    if magic != MAGIC:
        raise ForeignFrameError(f"unknown magic {magic!r}")
    if version != VERSION:
        raise MalformedFrameError(f"unsupported version {version}")
    try:
        return VehicleState(vid, ts, GeoPoint(lat, lon, alt), speed, heading, accel, seq)
    except InvalidInputError as exc:
        raise MalformedFrameError(str(exc)) from exc


def peek_vehicle_id(data: bytes) -> int:
    """Sender id of a frame without full decoding; -1 if the frame is too short."""
    return data[5] if len(data) > 5 else -1
