"""Kinematic bicycle plant with a first-order speed lag."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..control import Actuation, clamp
from ..errors import InvalidInputError
from ..geo import EnuPoint, wrap_to_2pi


@dataclass(frozen=True)
class PlantParams:
    wheelbase: float = 0.33
    speed_lag: float = 0.2
    v_max: float = 3.0
    max_steer: float = 0.35

    def __post_init__(self):
        if not self.wheelbase > 0:
            raise InvalidInputError(f"wheelbase must be > 0: {self.wheelbase}")
        if not self.speed_lag >= 0:
            raise InvalidInputError(f"speed_lag must be >= 0: {self.speed_lag}")
        if not self.v_max > 0:
            raise InvalidInputError(f"v_max must be > 0: {self.v_max}")
        if not 0 < self.max_steer <= math.pi / 2:
            raise InvalidInputError(f"max_steer must be in (0, pi/2]: {self.max_steer}")


@dataclass(frozen=True)
class Pose:
    position: EnuPoint
    heading: float
    speed: float


def bicycle_step(pose: Pose, command: Actuation, params: PlantParams, dt: float) -> Pose:
    """Advance one step: lag the speed, rotate by the yaw rate, then move along the new heading."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0: {dt}")
    v_cmd = clamp(command.applied_speed, 0.0, params.v_max)
    steer = clamp(command.steering, -params.max_steer, params.max_steer)
    if params.speed_lag > 0:
        speed = pose.speed + (dt / max(params.speed_lag, dt)) * (v_cmd - pose.speed)
    else:
        speed = v_cmd
    heading = wrap_to_2pi(pose.heading + dt * speed * math.tan(steer) / params.wheelbase)
    step = dt * speed
    p = pose.position
    return Pose(
        EnuPoint(p.east + step * math.sin(heading), p.north + step * math.cos(heading), p.up),
        heading,
        speed,
    )
