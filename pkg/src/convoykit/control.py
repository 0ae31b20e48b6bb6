"""Speed (PD) and steering (Stanley) controllers.

Both are pure functions; the only state is the previous speed error, which
the caller owns and threads back in on the next tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import InvalidInputError
from .geo import EnuPoint, wrap_to_pi

if TYPE_CHECKING:
    from .model import VehicleState


@dataclass(frozen=True)
class PdGains:
    kp: float = 0.8
    kd: float = 0.1
    v_max: float = 3.0

    def __post_init__(self):
        if not self.kp > 0:
            raise InvalidInputError(f"kp must be > 0: {self.kp}")
        if not self.kd >= 0:
            raise InvalidInputError(f"kd must be >= 0: {self.kd}")
        if not self.v_max > 0:
            raise InvalidInputError(f"v_max must be > 0: {self.v_max}")


@dataclass(frozen=True)
class StanleyGains:
    k_cte: float = 1.0
    softening: float = 0.1
    max_steer: float = 0.35

    def __post_init__(self):
        if not self.k_cte > 0:
            raise InvalidInputError(f"k_cte must be > 0: {self.k_cte}")
        if not self.softening > 0:
            raise InvalidInputError(f"softening must be > 0: {self.softening}")
        if not 0 < self.max_steer <= math.pi / 2:
            raise InvalidInputError(f"max_steer must be in (0, pi/2]: {self.max_steer}")


@dataclass(frozen=True)
class Actuation:
    applied_speed: float = 0.0
    steering: float = 0.0


def clamp(value: float, low: float, high: float) -> float:
    return low if value < low else high if value > high else value


def pd_speed_control(
    target_speed: float,
    ego: VehicleState,
    gains: PdGains,
    prev_error: float,
    dt: float,
) -> tuple[float, float]:
    """Velocity-form PD on the speed error.

    Returns ``(applied_speed, error)``; feed ``error`` back as ``prev_error``
    on the next call.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0: {dt}")
    error = target_speed - ego.speed
    command = ego.speed + gains.kp * error + gains.kd * (error - prev_error) / dt
    return clamp(command, 0.0, gains.v_max), error


def cross_track_error(goal: EnuPoint, heading: float, position: EnuPoint) -> float:
    """Signed lateral offset of ``position`` from the line through ``goal`` along ``heading``.

    Positive when the point lies left of the direction of travel.
    """
    de = position.east - goal.east
    dn = position.north - goal.north
    return dn * math.sin(heading) - de * math.cos(heading)


def stanley_heading_control(
    target_heading: float,
    goal: EnuPoint,
    ego_enu: EnuPoint,
    ego: VehicleState,
    gains: StanleyGains,
) -> float:
    """Steering angle; positive steers clockwise (to the right)."""
    heading_error = wrap_to_pi(target_heading - ego.heading)
    cte = cross_track_error(goal, target_heading, ego_enu)
    delta = heading_error + math.atan(gains.k_cte * cte / (gains.softening + ego.speed))
    return clamp(delta, -gains.max_steer, gains.max_steer)
