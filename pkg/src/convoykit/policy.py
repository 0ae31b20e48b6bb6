"""Communication gates and the fixed-distance spacing objective.

The spacing cost for candidate speed ``v`` and heading ``theta`` is the sum
of squared distances between the ego vehicle's position projected one
control step ahead and each fresh predecessor's goal point. Because the
cost is a sum of squares it equals ``m * |C - q|^2 + const`` with ``C`` the
centroid of the goal points, so the argmin is driving straight at ``C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InvalidInputError, MissingEgoError
from .geo import EnuPoint, GeoPoint, bearing_enu, enu_from_geodetic, heading_unit
from .model import ConvoyConfig, StoreSnapshot, VehicleState


@dataclass(frozen=True)
class TargetCommand:
    target_speed: float = 0.0
    target_heading: float = 0.0
    valid: bool = False
    # centroid of the goal points and ego position, both in the store's local plane
    goal: Optional[EnuPoint] = None
    ego_enu: Optional[EnuPoint] = None


INVALID_TARGET = TargetCommand()

# geodetic round trips leave ~1e-10 m of noise; closer than this counts as on the goal
AT_GOAL_TOLERANCE = 1e-6


def rx_gate_all_predecessor(ego: int, sender: int) -> int:
    """Admit messages from every vehicle ahead of the ego vehicle."""
    return 1 if sender < ego else 0


def tx_gate_always(snapshot: Optional[StoreSnapshot] = None) -> int:
    return 1


def predecessor_goal_point(
    pred: VehicleState,
    ego_index: int,
    pred_index: int,
    d_des: float,
    origin: GeoPoint,
) -> EnuPoint:
    """Where the ego vehicle should be to sit ``(ego - pred) * d_des`` behind ``pred``."""
    if not pred_index < ego_index:
        raise InvalidInputError(f"vehicle {pred_index} is not a predecessor of {ego_index}")
    if not math.isfinite(pred.heading):
        raise InvalidInputError(f"non-finite predecessor heading: {pred.heading!r}")
    pos = enu_from_geodetic(origin, pred.position)
    back = (ego_index - pred_index) * d_des
    ue, un = heading_unit(pred.heading)
    return EnuPoint(pos.east - back * ue, pos.north - back * un, pos.up)


def goal_points(snapshot: StoreSnapshot, config: ConvoyConfig) -> tuple[EnuPoint, list[EnuPoint]]:
    """Ego position and the goal point of every fresh predecessor, in the local plane."""
    ego = snapshot.own
    if ego is None:
        raise MissingEgoError(f"snapshot has no state for ego vehicle {snapshot.own_id}")
    origin = snapshot.origin
    if origin is None:
        # nothing received yet; anchor on ego so the ego position is still expressible
        return EnuPoint(0.0, 0.0, 0.0), []
    ego_enu = enu_from_geodetic(origin, ego.position)
    horizon = config.staleness_horizon_us
    goals = []
    for source in snapshot.buffers:
        if source >= config.ego_index:
            continue
        pred = snapshot.fresh(source, horizon, ego.timestamp_us)
        if pred is None:
            continue
        goals.append(predecessor_goal_point(pred, config.ego_index, source, config.desired_gap, origin))
    return ego_enu, goals


def sigma_platooning_cost(
    v: float,
    theta: float,
    snapshot: StoreSnapshot,
    config: ConvoyConfig,
    dt: float,
) -> float:
    """Sum over fresh predecessors of squared distance from goal to the projected ego point."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0: {dt}")
    ego_enu, goals = goal_points(snapshot, config)
    ue, un = heading_unit(theta)
    qe = ego_enu.east + dt * v * ue
    qn = ego_enu.north + dt * v * un
    return sum((g.east - qe) ** 2 + (g.north - qn) ** 2 for g in goals)


def solve_targets(snapshot: StoreSnapshot, config: ConvoyConfig, dt: float) -> TargetCommand:
    """Closed-form argmin of :func:`sigma_platooning_cost` over ``v in [0, v_max]``."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0: {dt}")
    ego_enu, goals = goal_points(snapshot, config)
    if not goals:
        return INVALID_TARGET
    m = len(goals)
    centroid = EnuPoint(
        sum(g.east for g in goals) / m,
        sum(g.north for g in goals) / m,
        sum(g.up for g in goals) / m,
    )
    dist = math.hypot(centroid.east - ego_enu.east, centroid.north - ego_enu.north)
    if dist <= AT_GOAL_TOLERANCE:
        return TargetCommand(0.0, snapshot.own.heading, True, centroid, ego_enu)
    speed = min(dist / dt, config.pd.v_max)
    return TargetCommand(speed, bearing_enu(ego_enu, centroid), True, centroid, ego_enu)


RX_GATES: dict[str, Callable[[int, int], int]] = {
    "all_predecessor": rx_gate_all_predecessor,
}
TX_GATES: dict[str, Callable[[Optional[StoreSnapshot]], int]] = {
    "tx_always": tx_gate_always,
}
SPACING_POLICIES: dict[str, Callable[[StoreSnapshot, ConvoyConfig, float], TargetCommand]] = {
    "platooning": solve_targets,
}


def lookup(registry: dict, name: str):
    try:
        return registry[name]
    except KeyError:
        raise InvalidInputError(f"unknown policy {name!r}; known: {sorted(registry)}") from None
