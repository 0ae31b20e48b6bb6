"""Closed-loop convoy simulation.

Each tick, every vehicle records its own state, broadcasts it on the
broadcast period, drains its receive queue into its state store, solves
the spacing objective, runs the speed and steering controllers and steps
its plant. In virtual-clock mode all vehicles share one deterministic
loop and all frames sent in a tick are delivered before any control step
of that tick.
"""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
import time
from typing import Optional

from ..control import Actuation, pd_speed_control, stanley_heading_control
from ..errors import TransportError
from ..geo import geodetic_from_enu, wrap_to_pi
from ..model import StateStore, VehicleState
from ..net.codec import encode_bsm
from ..net.loss import LossModel
from ..net.transport import DEFAULT_GROUP, DEFAULT_PORT, MulticastTransport, Transport, VirtualChannel
from ..policy import RX_GATES, SPACING_POLICIES, TX_GATES, TargetCommand, lookup
from .plant import Pose, bicycle_step
from .scenario import ScenarioConfig
from .trace import Trace, TraceRow, VehicleTick

LOG = logging.getLogger(__name__)


class VehicleAgent:
    """One vehicle: plant, state store, gates and controllers."""

    def __init__(self, index: int, scenario: ScenarioConfig, transport: Transport):
        self.index = index
        self.scenario = scenario
        self.spec = scenario.vehicles[index]
        self.config = scenario.convoy_config(index)
        self.transport = transport
        self.pose: Pose = scenario.initial_pose(index)
        self.store = StateStore.for_config(self.config)
        self.rx_gate = lookup(RX_GATES, scenario.rx_gate)
        self.tx_gate = lookup(TX_GATES, scenario.tx_gate)
        self.spacing = lookup(SPACING_POLICIES, scenario.spacing)
        self.dt = scenario.control_period
        self.sequence = -1
        self.acceleration = 0.0
        self.prev_error = 0.0
        self.last = Actuation()
        self.last_target: Optional[TargetCommand] = None

    @property
    def is_leader(self) -> bool:
        return self.index == 0

    def observe(self, t_us: int) -> VehicleState:
        """Publish the plant's current pose into the ego slot of the store."""
        self.sequence += 1
        state = VehicleState(
            vehicle_id=self.index,
            timestamp_us=t_us,
            position=geodetic_from_enu(self.scenario.origin, self.pose.position),
            speed=self.pose.speed,
            heading=self.pose.heading,
            acceleration=self.acceleration,
            sequence=self.sequence,
        )
        self.store.update_own(state)
        return state

    def broadcast(self, state: VehicleState) -> bool:
        if not self.tx_gate(self.store.snapshot()):
            return False
        self.transport.send(encode_bsm(state))
        return True

    def receive(self) -> int:
        accepted = 0
        for state in self.transport.recv():
            accepted += self.store.insert(state, self.rx_gate)
        return accepted

    def control(self, t: float) -> Actuation:
        ego = self.store.snapshot().own
        if self.is_leader:
            v_a, self.prev_error = pd_speed_control(
                self.scenario.leader_speed(t), ego, self.config.pd, self.prev_error, self.dt
            )
            self.last = Actuation(v_a, 0.0)
            return self.last
        snap = self.store.snapshot()
        target = self.spacing(snap, self.config, self.dt)
        self.last_target = target
        if not target.valid:
            # no fresh predecessor: hold the previous command
            return self.last
        v_t, theta_t = target.target_speed, target.target_heading
        if abs(wrap_to_pi(theta_t - ego.heading)) > math.pi / 2:
            # goal is behind; the plant cannot reverse, so stop and keep heading
            v_t, theta_t = 0.0, ego.heading
        v_a, self.prev_error = pd_speed_control(v_t, ego, self.config.pd, self.prev_error, self.dt)
        steer = stanley_heading_control(theta_t, target.goal, target.ego_enu, ego, self.config.stanley)
        self.last = Actuation(v_a, steer)
        return self.last

    def step(self, command: Actuation) -> None:
        new = bicycle_step(self.pose, command, self.spec.plant, self.dt)
        self.acceleration = (new.speed - self.pose.speed) / self.dt
        self.pose = new

    def tick_record(self, command: Actuation, gap: Optional[float]) -> VehicleTick:
        st = self.transport.stats
        p = self.pose
        return VehicleTick(
            east=p.position.east,
            north=p.position.north,
            speed=p.speed,
            heading=p.heading,
            cmd_speed=command.applied_speed,
            steer=command.steering,
            gap=gap,
            rx_offered=st.offered,
            rx_accepted=self.store.accepted,
            rx_lost=st.lost,
            rx_gate=self.store.rejected_gate,
            rx_stale=self.store.rejected_stale,
        )


def _gap(a: Pose, b: Pose) -> float:
    return math.hypot(a.position.east - b.position.east, a.position.north - b.position.north)


def run_scenario(config: ScenarioConfig) -> Trace:
    """Single-process, virtual-clock run. Same config and seed give a bit-identical trace."""
    config.validate()
    channel = VirtualChannel()
    agents = [
        VehicleAgent(i, config, channel.endpoint(i, LossModel.for_receiver(spec.per, config.seed, i)))
        for i, spec in enumerate(config.vehicles)
    ]
    trace = Trace(config.vehicle_count)
    dt_us = config.dt_us
    every = config.broadcast_every
    for k in range(config.n_ticks):
        t_us = config.start_epoch_us + k * dt_us
        t = k * dt_us / 1e6
        states = [a.observe(t_us) for a in agents]
        if k % every == 0:
            for agent, state in zip(agents, states):
                agent.broadcast(state)
        for agent in agents:
            agent.receive()
        commands = [a.control(t) for a in agents]
        ticks = tuple(
            a.tick_record(cmd, None if i == 0 else _gap(a.pose, agents[i - 1].pose))
            for i, (a, cmd) in enumerate(zip(agents, commands))
        )
        trace.append(TraceRow(t, ticks))
        for agent, cmd in zip(agents, commands):
            agent.step(cmd)
    return trace


# -- multi-process mode over real multicast ---------------------------------------


def _node_main(index, config, group, port, interface, start_wall, queue):
    try:
        loss = LossModel.for_receiver(config.vehicles[index].per, config.seed, index)
        transport = MulticastTransport(index, loss, group, port, interface)
    except TransportError as exc:
        queue.put((index, None, str(exc)))
        return
    agent = VehicleAgent(index, config, transport)
    start_us = int(start_wall * 1e6)
    rows = []
    try:
        for k in range(config.n_ticks):
            delay = start_wall + k * config.control_period - time.time()
            if delay > 0:
                time.sleep(delay)
            state = agent.observe(start_us + k * config.dt_us)
            if k % config.broadcast_every == 0:
                agent.broadcast(state)
            agent.receive()
            cmd = agent.control(k * config.dt_us / 1e6)
            rows.append(agent.tick_record(cmd, None))
            agent.step(cmd)
    except TransportError as exc:
        queue.put((index, None, str(exc)))
        return
    finally:
        transport.close()
    queue.put((index, rows, None))


def run_multicast(
    config: ScenarioConfig,
    group: str = DEFAULT_GROUP,
    port: int = DEFAULT_PORT,
    interface: Optional[str] = None,
    startup_delay: float = 1.0,
) -> Trace:
    """One process per vehicle over IPv6 multicast, paced by the wall clock.

    Timing depends on the OS scheduler, so runs are not reproducible.
    """
    config.validate()
    ctx = mp.get_context("fork")
    queue = ctx.Queue()
    start_wall = time.time() + startup_delay
    procs = [
        ctx.Process(target=_node_main, args=(i, config, group, port, interface, start_wall, queue))
        for i in range(config.vehicle_count)
    ]
    for p in procs:
        p.start()
    results = {}
    timeout = startup_delay + config.duration + 30.0
    deadline = time.time() + timeout
    try:
        for _ in procs:
            index, rows, err = queue.get(timeout=max(deadline - time.time(), 0.1))
            if err is not None:
                raise TransportError(f"vehicle {index}: {err}")
            results[index] = rows
    finally:
        for p in procs:
            p.join(timeout=5)
            if p.is_alive():
                p.terminate()
    trace = Trace(config.vehicle_count)
    for k in range(config.n_ticks):
        ticks = []
        for i in range(config.vehicle_count):
            tick = results[i][k]
            if i > 0:
                prev = results[i - 1][k]
                gap = math.hypot(tick.east - prev.east, tick.north - prev.north)
                tick = VehicleTick(**{**{f: getattr(tick, f) for f in tick.__slots__}, "gap": gap})
            ticks.append(tick)
        trace.append(TraceRow(k * config.dt_us / 1e6, tuple(ticks)))
    return trace
