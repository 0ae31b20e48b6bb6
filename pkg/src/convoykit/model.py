"""Vehicle state snapshots, the per-vehicle state store and convoy configuration."""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

from .control import PdGains, StanleyGains
from .errors import InvalidInputError
from .geo import TWO_PI, GeoPoint

RxGate = Callable[[int, int], int]

MAX_VEHICLE_ID = 0xFF
MAX_SEQUENCE = 0xFFFFFFFF
MAX_TIMESTAMP_US = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True, slots=True)
class VehicleState:
    """One broadcastable snapshot of a vehicle. Vehicle 0 leads the convoy."""

    vehicle_id: int
    timestamp_us: int
    position: GeoPoint
    speed: float
    heading: float
    acceleration: float
    sequence: int

    def __post_init__(self):
        if not 0 <= self.vehicle_id <= MAX_VEHICLE_ID:
            raise InvalidInputError(f"vehicle_id out of range: {self.vehicle_id}")
        if not 0 <= self.timestamp_us <= MAX_TIMESTAMP_US:
            raise InvalidInputError(f"timestamp_us out of range: {self.timestamp_us}")
        if not 0 <= self.sequence <= MAX_SEQUENCE:
            raise InvalidInputError(f"sequence out of range: {self.sequence}")
        if not isinstance(self.position, GeoPoint):
            raise InvalidInputError("position must be a GeoPoint")
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise InvalidInputError(f"speed must be finite and >= 0: {self.speed!r}")
        if not (math.isfinite(self.heading) and 0.0 <= self.heading < TWO_PI):
            raise InvalidInputError(f"heading must be in [0, 2pi): {self.heading!r}")
        if not math.isfinite(self.acceleration):
            raise InvalidInputError(f"acceleration not finite: {self.acceleration!r}")


@dataclass(frozen=True)
class ConvoyConfig:
    vehicle_count: int
    ego_index: int = 0
    desired_gap: float = 15.0
    broadcast_period: float = 0.1
    staleness_horizon: Optional[float] = None
    buffer_depth: int = 10
    pd: PdGains = field(default_factory=PdGains)
    stanley: StanleyGains = field(default_factory=StanleyGains)

    def __post_init__(self):
        if self.vehicle_count < 1 or self.vehicle_count > MAX_VEHICLE_ID + 1:
            raise InvalidInputError(f"vehicle_count out of range: {self.vehicle_count}")
        if not 0 <= self.ego_index < self.vehicle_count:
            raise InvalidInputError(f"ego_index out of range: {self.ego_index}")
        if not self.desired_gap > 0:
            raise InvalidInputError(f"desired_gap must be > 0: {self.desired_gap}")
        if not self.broadcast_period > 0:
            raise InvalidInputError(f"broadcast_period must be > 0: {self.broadcast_period}")
        if self.buffer_depth < 1:
            raise InvalidInputError(f"buffer_depth must be >= 1: {self.buffer_depth}")
        if self.staleness_horizon is None:
            object.__setattr__(self, "staleness_horizon", 3.0 * self.broadcast_period)
        elif not self.staleness_horizon > 0:
            raise InvalidInputError(f"staleness_horizon must be > 0: {self.staleness_horizon}")

    @property
    def staleness_horizon_us(self) -> int:
        return round(self.staleness_horizon * 1e6)


@dataclass(frozen=True)
class StoreSnapshot:
    """Point-in-time, read-only copy of a :class:`StateStore`."""

    own_id: int
    origin: Optional[GeoPoint]
    buffers: Mapping[int, tuple[VehicleState, ...]]

    @property
    def own(self) -> Optional[VehicleState]:
        buf = self.buffers.get(self.own_id)
        return buf[-1] if buf else None

    def latest(self, source: int) -> Optional[VehicleState]:
        buf = self.buffers.get(source)
        return buf[-1] if buf else None

    def fresh(self, source: int, horizon_us: int, now_us: Optional[int] = None) -> Optional[VehicleState]:
        """Latest state of ``source`` if it is younger than ``horizon_us``."""
        head = self.latest(source)
        if head is None:
            return None
        if now_us is None:
            own = self.own
            now_us = own.timestamp_us if own is not None else head.timestamp_us
        if now_us - head.timestamp_us < horizon_us:
            return head
        return None


class StateStore:
    """Ring buffers of the most recent states per source vehicle.

    Writes are serialized by a lock; :meth:`snapshot` returns an immutable
    copy so readers never observe a half-applied insert.

    The local ENU origin is anchored at the position of the first received
    state the store accepts and stays fixed for the lifetime of the store.
    """

    def __init__(
        self,
        own_id: int,
        buffer_depth: int = 10,
        staleness_horizon: float = 0.3,
        own_state: Optional[VehicleState] = None,
    ):
        if buffer_depth < 1:
            raise InvalidInputError("buffer_depth must be >= 1")
        self.own_id = own_id
        self.buffer_depth = buffer_depth
        self.staleness_horizon_us = round(staleness_horizon * 1e6)
        self.origin: Optional[GeoPoint] = None
        self._buffers: dict[int, deque] = {}
        self._lock = threading.Lock()
        self.accepted = 0
        self.rejected_gate = 0
        self.rejected_stale = 0
        if own_state is not None:
            self.update_own(own_state)

    @classmethod
    def for_config(cls, config: ConvoyConfig, own_state: Optional[VehicleState] = None) -> StateStore:
        return cls(config.ego_index, config.buffer_depth, config.staleness_horizon, own_state)

    def _is_newer(self, buf, state: VehicleState) -> bool:
        if not buf:
            return True
        head = buf[-1]
        return state.sequence > head.sequence and state.timestamp_us > head.timestamp_us

    def _append(self, state: VehicleState) -> None:
        buf = self._buffers.get(state.vehicle_id)
        if buf is None:
            buf = self._buffers[state.vehicle_id] = deque(maxlen=self.buffer_depth)
        buf.append(state)

    def update_own(self, state: VehicleState) -> None:
        """Record the ego vehicle's current state (bypasses the Rx gate)."""
        if state.vehicle_id != self.own_id:
            raise InvalidInputError(
                f"own state has vehicle_id {state.vehicle_id}, store belongs to {self.own_id}"
            )
        with self._lock:
            if not self._is_newer(self._buffers.get(self.own_id), state):
                raise InvalidInputError("own state must advance sequence and timestamp")
            self._append(state)

    def insert(self, incoming: VehicleState, rx_gate: RxGate) -> bool:
        """Store a received state if the Rx gate admits it and it is newer than the head."""
        with self._lock:
            if not rx_gate(self.own_id, incoming.vehicle_id):
                self.rejected_gate += 1
                return False
            if not self._is_newer(self._buffers.get(incoming.vehicle_id), incoming):
                self.rejected_stale += 1
                return False
            self._append(incoming)
            if self.origin is None:
                self.origin = incoming.position
            self.accepted += 1
            return True

    def latest(self, source: int, now_us: Optional[int] = None) -> Optional[VehicleState]:
        """Newest state of ``source``, or None when absent or older than the staleness horizon.

        ``now_us`` defaults to the ego vehicle's latest timestamp.
        """
        return self.snapshot().fresh(source, self.staleness_horizon_us, now_us)

    def snapshot(self) -> StoreSnapshot:
        with self._lock:
            buffers = {src: tuple(buf) for src, buf in self._buffers.items()}
            origin = self.origin
        return StoreSnapshot(self.own_id, origin, MappingProxyType(buffers))

    def __len__(self) -> int:
        return len(self._buffers)
