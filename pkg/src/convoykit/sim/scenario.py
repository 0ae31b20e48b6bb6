"""Scenario configuration and its YAML file format.

A scenario file is a YAML mapping; every key is optional and falls back to
the 1/10-scale defaults below. Unknown keys are rejected so typos surface
as errors with the offending line number.

    name: paper-repro
    vehicles: 3
    desired_gap_m: 15.0
    control_period_s: 0.05
    broadcast_period_s: 0.1
    staleness_horizon_s: 0.3
    buffer_depth: 10
    duration_s: 180.0
    seed: 1
    start_epoch_us: 1700000000000000
    origin: {latitude: 28.6024, longitude: -81.2001, altitude: 0.0}
    leader_profile: [[0, 1.0], [60, 2.0], [120, 1.0]]   # [start_s, speed_mps]
    per: 0.0                 # one value for every follower, or a list per follower
    policies: {rx_gate: all_predecessor, tx_gate: tx_always, spacing: platooning}
    vehicle_defaults:
      plant: {wheelbase_m: 0.33, speed_lag_s: 0.2, v_max_mps: 3.0, max_steer_rad: 0.35}
      pd: {kp: 0.8, kd: 0.1}
      stanley: {k_cte: 1.0, softening_mps: 0.1}
    vehicle_overrides:
      2: {plant: {wheelbase_m: 0.5}}
    initial_poses:           # optional; default is in line behind the leader
      - {east_m: 0.0, north_m: 0.0, heading_rad: 0.0}
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from ..control import PdGains, StanleyGains
from ..errors import ConfigError, InvalidInputError
from ..geo import EnuPoint, GeoPoint, wrap_to_2pi
from ..model import ConvoyConfig
from ..policy import RX_GATES, SPACING_POLICIES, TX_GATES
from .plant import PlantParams, Pose

SCHEMA_VERSION = 1
BUNDLED_SCENARIOS = ("paper-repro",)

DEFAULT_PROFILE = ((0.0, 1.0), (60.0, 2.0), (120.0, 1.0))


@dataclass(frozen=True)
class VehicleSpec:
    plant: PlantParams = field(default_factory=PlantParams)
    kp: float = 0.8
    kd: float = 0.1
    k_cte: float = 1.0
    softening: float = 0.1
    per: float = 0.0

    @property
    def pd(self) -> PdGains:
        return PdGains(self.kp, self.kd, self.plant.v_max)

    @property
    def stanley(self) -> StanleyGains:
        return StanleyGains(self.k_cte, self.softening, self.plant.max_steer)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "paper-repro"
    vehicles: tuple[VehicleSpec, ...] = (VehicleSpec(), VehicleSpec(), VehicleSpec())
    desired_gap: float = 15.0
    control_period: float = 0.05
    broadcast_period: float = 0.1
    staleness_horizon: Optional[float] = None
    buffer_depth: int = 10
    duration: float = 180.0
    seed: int = 1
    start_epoch_us: int = 1_700_000_000_000_000
    origin: GeoPoint = GeoPoint(28.6024, -81.2001, 0.0)
    leader_profile: tuple[tuple[float, float], ...] = DEFAULT_PROFILE
    initial_poses: Optional[tuple[Pose, ...]] = None
    rx_gate: str = "all_predecessor"
    tx_gate: str = "tx_always"
    spacing: str = "platooning"

    def __post_init__(self):
        self.validate()

    # -- derived quantities -------------------------------------------------

    @property
    def vehicle_count(self) -> int:
        return len(self.vehicles)

    @property
    def dt_us(self) -> int:
        return round(self.control_period * 1e6)

    @property
    def n_ticks(self) -> int:
        return round(self.duration / self.control_period)

    @property
    def broadcast_every(self) -> int:
        """Broadcast period expressed in control ticks."""
        return round(self.broadcast_period / self.control_period)

    @property
    def jump_times(self) -> tuple[float, ...]:
        """Times at which the leader's commanded speed changes, including the start from rest."""
        return tuple(t for t, _ in self.leader_profile)

    def leader_speed(self, t: float) -> float:
        speed = self.leader_profile[0][1]
        for start, v in self.leader_profile:
            if t + 1e-9 >= start:
                speed = v
            else:
                break
        return speed

    def convoy_config(self, ego_index: int) -> ConvoyConfig:
        spec = self.vehicles[ego_index]
        return ConvoyConfig(
            vehicle_count=self.vehicle_count,
            ego_index=ego_index,
            desired_gap=self.desired_gap,
            broadcast_period=self.broadcast_period,
            staleness_horizon=self.staleness_horizon,
            buffer_depth=self.buffer_depth,
            pd=spec.pd,
            stanley=spec.stanley,
        )

    def initial_pose(self, index: int) -> Pose:
        if self.initial_poses is not None:
            return self.initial_poses[index]
        return Pose(EnuPoint(0.0, -index * self.desired_gap, 0.0), 0.0, 0.0)

    @property
    def follower_per(self) -> tuple[float, ...]:
        return tuple(v.per for v in self.vehicles[1:])

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        def bad(fld, msg):
            raise ConfigError(f"{fld}: {msg}", field=fld)

        n = len(self.vehicles)
        if not 1 <= n <= 256:
            bad("vehicles", f"vehicle count must be in [1, 256], got {n}")
        if not self.desired_gap > 0:
            bad("desired_gap_m", f"must be > 0, got {self.desired_gap}")
        if not self.control_period > 0:
            bad("control_period_s", f"must be > 0, got {self.control_period}")
        if abs(self.control_period * 1e6 - round(self.control_period * 1e6)) > 1e-6:
            bad("control_period_s", "must be a whole number of microseconds")
        if not self.broadcast_period > 0:
            bad("broadcast_period_s", f"must be > 0, got {self.broadcast_period}")
        ratio = self.broadcast_period / self.control_period
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
            bad("broadcast_period_s", "must be a whole multiple of control_period_s")
        if self.staleness_horizon is not None and not self.staleness_horizon > 0:
            bad("staleness_horizon_s", f"must be > 0, got {self.staleness_horizon}")
        if self.buffer_depth < 1:
            bad("buffer_depth", f"must be >= 1, got {self.buffer_depth}")
        if not self.duration > 0:
            bad("duration_s", f"must be > 0, got {self.duration}")
        if abs(self.duration / self.control_period - round(self.duration / self.control_period)) > 1e-6:
            bad("duration_s", "must be a whole multiple of control_period_s")
        if not 0 <= self.seed < 2**63:
            bad("seed", f"must be a non-negative 63-bit integer, got {self.seed}")
        if not self.leader_profile:
            bad("leader_profile", "needs at least one [start_s, speed_mps] entry")
        if self.leader_profile[0][0] != 0:
            bad("leader_profile", "first entry must start at 0 s")
        last = -math.inf
        for t, v in self.leader_profile:
            if not t > last:
                bad("leader_profile", "start times must be strictly increasing")
            if not 0 <= v <= self.vehicles[0].plant.v_max:
                bad("leader_profile", f"speed {v} outside [0, leader v_max]")
            last = t
        for i, spec in enumerate(self.vehicles):
            if not 0.0 <= spec.per <= 1.0:
                bad("per", f"must be in [0, 1], got {spec.per} (vehicle {i})")
            try:
                spec.pd, spec.stanley
            except InvalidInputError as exc:
                bad(f"vehicle {i} gains", str(exc))
        if self.initial_poses is not None and len(self.initial_poses) != n:
            bad("initial_poses", f"expected {n} poses, got {len(self.initial_poses)}")
        for fld, name, registry in (
            ("policies.rx_gate", self.rx_gate, RX_GATES),
            ("policies.tx_gate", self.tx_gate, TX_GATES),
            ("policies.spacing", self.spacing, SPACING_POLICIES),
        ):
            if name not in registry:
                bad(fld, f"unknown policy {name!r}; known: {sorted(registry)}")

    # -- overrides and serialization ---------------------------------------

    def with_overrides(
        self,
        per: Optional[float] = None,
        seed: Optional[int] = None,
        duration: Optional[float] = None,
        gap: Optional[float] = None,
    ) -> ScenarioConfig:
        """Copy with command-line style overrides applied; ``per`` applies to every follower."""
        changes: dict[str, Any] = {}
        if per is not None:
            if not 0.0 <= per <= 1.0:
                raise ConfigError(f"per: must be in [0, 1], got {per}", field="per")
            changes["vehicles"] = (self.vehicles[0],) + tuple(replace(v, per=per) for v in self.vehicles[1:])
        if seed is not None:
            changes["seed"] = seed
        if duration is not None:
            changes["duration"] = duration
        if gap is not None:
            changes["desired_gap"] = gap
        return replace(self, **changes)

    def to_dict(self) -> dict:
        def plant(p: PlantParams) -> dict:
            return {
                "wheelbase_m": p.wheelbase,
                "speed_lag_s": p.speed_lag,
                "v_max_mps": p.v_max,
                "max_steer_rad": p.max_steer,
            }

        out: dict[str, Any] = {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "vehicles": self.vehicle_count,
            "desired_gap_m": self.desired_gap,
            "control_period_s": self.control_period,
            "broadcast_period_s": self.broadcast_period,
            "staleness_horizon_s": self.staleness_horizon,
            "buffer_depth": self.buffer_depth,
            "duration_s": self.duration,
            "seed": self.seed,
            "start_epoch_us": self.start_epoch_us,
            "origin": {
                "latitude": self.origin.latitude,
                "longitude": self.origin.longitude,
                "altitude": self.origin.altitude,
            },
            "leader_profile": [[t, v] for t, v in self.leader_profile],
            "per": list(self.follower_per),
            "policies": {"rx_gate": self.rx_gate, "tx_gate": self.tx_gate, "spacing": self.spacing},
            "vehicle_overrides": {
                i: {
                    "plant": plant(v.plant),
                    "pd": {"kp": v.kp, "kd": v.kd},
                    "stanley": {"k_cte": v.k_cte, "softening_mps": v.softening},
                }
                for i, v in enumerate(self.vehicles)
            },
        }
        if out["staleness_horizon_s"] is None:
            del out["staleness_horizon_s"]
        if self.initial_poses is not None:
            out["initial_poses"] = [
                {"east_m": p.position.east, "north_m": p.position.north, "heading_rad": p.heading}
                for p in self.initial_poses
            ]
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form of the effective configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- file loading -------------------------------------------------------------

_TOP_KEYS = {
    "schema", "name", "vehicles", "desired_gap_m", "control_period_s", "broadcast_period_s",
    "staleness_horizon_s", "buffer_depth", "duration_s", "seed", "start_epoch_us", "origin",
    "leader_profile", "per", "policies", "vehicle_defaults", "vehicle_overrides", "initial_poses",
}
_PLANT_KEYS = {"wheelbase_m": "wheelbase", "speed_lag_s": "speed_lag", "v_max_mps": "v_max",
               "max_steer_rad": "max_steer"}
_PD_KEYS = {"kp": "kp", "kd": "kd"}
_STANLEY_KEYS = {"k_cte": "k_cte", "softening_mps": "softening"}


def _line_map(node, path=(), out=None) -> dict:
    if out is None:
        out = {}
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            sub = path + (str(key_node.value),)
            _line_map(value_node, sub, out)
            # a key's own line beats the line of its value
            out[sub] = key_node.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, path + (str(i),), out)
    return out


class _Reader:
    def __init__(self, lines: dict, source: Optional[str]):
        self.lines = lines
        self.source = source

    def error(self, path: tuple, msg: str) -> ConfigError:
        line = None
        for k in range(len(path), -1, -1):
            line = self.lines.get(tuple(str(p) for p in path[:k]))
            if line is not None:
                break
        name = ".".join(str(p) for p in path)
        return ConfigError(f"{name}: {msg}", field=name, line=line, source=self.source)

    def number(self, value, path, integer=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        if integer:
            if isinstance(value, float) and not value.is_integer():
                raise self.error(path, f"expected an integer, got {value!r}")
            return int(value)
        value = float(value)
        if not math.isfinite(value):
            raise self.error(path, f"must be finite, got {value!r}")
        return value

    def mapping(self, value, path, allowed) -> dict:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise self.error(path, "expected a mapping")
        for key in value:
            if str(key) not in allowed:
                raise self.error(path + (key,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value


def _vehicle_spec(reader: _Reader, base: VehicleSpec, data: dict, path: tuple) -> VehicleSpec:
    data = reader.mapping(data, path, {"plant", "pd", "stanley"})
    plant_changes = {}
    raw = reader.mapping(data.get("plant"), path + ("plant",), set(_PLANT_KEYS))
    for key, attr in _PLANT_KEYS.items():
        if key in raw:
            plant_changes[attr] = reader.number(raw[key], path + ("plant", key))
    try:
        plant = replace(base.plant, **plant_changes)
    except InvalidInputError as exc:
        raise reader.error(path + ("plant",), str(exc)) from None
    changes = {"plant": plant}
    for section, keys in (("pd", _PD_KEYS), ("stanley", _STANLEY_KEYS)):
        raw = reader.mapping(data.get(section), path + (section,), set(keys))
        for key, attr in keys.items():
            if key in raw:
                changes[attr] = reader.number(raw[key], path + (section, key))
    spec = replace(base, **changes)
    try:
        spec.pd, spec.stanley
    except InvalidInputError as exc:
        raise reader.error(path, str(exc)) from None
    return spec


def scenario_from_dict(data: Any, lines: Optional[dict] = None, source: Optional[str] = None) -> ScenarioConfig:
    reader = _Reader(lines or {}, source)
    data = reader.mapping(data, (), _TOP_KEYS)
    defaults = ScenarioConfig()
    kw: dict[str, Any] = {}

    if "schema" in data and data["schema"] != SCHEMA_VERSION:
        raise reader.error(("schema",), f"unsupported schema {data['schema']!r}, expected {SCHEMA_VERSION}")
    if "name" in data:
        kw["name"] = str(data["name"])
    count = reader.number(data.get("vehicles", 3), ("vehicles",), integer=True)
    if not 1 <= count <= 256:
        raise reader.error(("vehicles",), f"vehicle count must be in [1, 256], got {count}")

    for key, attr, integer in (
        ("desired_gap_m", "desired_gap", False),
        ("control_period_s", "control_period", False),
        ("broadcast_period_s", "broadcast_period", False),
        ("staleness_horizon_s", "staleness_horizon", False),
        ("buffer_depth", "buffer_depth", True),
        ("duration_s", "duration", False),
        ("seed", "seed", True),
        ("start_epoch_us", "start_epoch_us", True),
    ):
        if key in data:
            kw[attr] = reader.number(data[key], (key,), integer)

    if "origin" in data:
        o = reader.mapping(data["origin"], ("origin",), {"latitude", "longitude", "altitude"})
        try:
            kw["origin"] = GeoPoint(
                reader.number(o.get("latitude", defaults.origin.latitude), ("origin", "latitude")),
                reader.number(o.get("longitude", defaults.origin.longitude), ("origin", "longitude")),
                reader.number(o.get("altitude", 0.0), ("origin", "altitude")),
            )
        except InvalidInputError as exc:
            raise reader.error(("origin",), str(exc)) from None

    if "leader_profile" in data:
        prof = data["leader_profile"]
        if not isinstance(prof, list) or not prof:
            raise reader.error(("leader_profile",), "expected a non-empty list of [start_s, speed_mps]")
        entries = []
        for i, item in enumerate(prof):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise reader.error(("leader_profile", i), "expected [start_s, speed_mps]")
            entries.append((
                reader.number(item[0], ("leader_profile", i, 0)),
                reader.number(item[1], ("leader_profile", i, 1)),
            ))
        kw["leader_profile"] = tuple(entries)

    policies = reader.mapping(data.get("policies"), ("policies",), {"rx_gate", "tx_gate", "spacing"})
    for key in ("rx_gate", "tx_gate", "spacing"):
        if key in policies:
            kw[key] = str(policies[key])

    base = _vehicle_spec(reader, VehicleSpec(), data.get("vehicle_defaults"), ("vehicle_defaults",))
    specs = [base] * count
    overrides = data.get("vehicle_overrides") or {}
    if not isinstance(overrides, dict):
        raise reader.error(("vehicle_overrides",), "expected a mapping of vehicle index to settings")
    for key, value in overrides.items():
        try:
            idx = int(key)
        except (TypeError, ValueError):
            idx = -1
        if not 0 <= idx < count:
            raise reader.error(("vehicle_overrides", key), f"no vehicle with index {key!r}")
        specs[idx] = _vehicle_spec(reader, specs[idx], value, ("vehicle_overrides", key))

    per = data.get("per", 0.0)
    if isinstance(per, list):
        if len(per) != count - 1:
            raise reader.error(("per",), f"expected {count - 1} follower values, got {len(per)}")
        pers = [reader.number(p, ("per", i)) for i, p in enumerate(per)]
    else:
        pers = [reader.number(per, ("per",))] * (count - 1)
    for i, p in enumerate(pers):
        if not 0.0 <= p <= 1.0:
            raise reader.error(("per",), f"must be in [0, 1], got {p}")
        specs[i + 1] = replace(specs[i + 1], per=p)
    kw["vehicles"] = tuple(specs)

    if "initial_poses" in data:
        raw = data["initial_poses"]
        if not isinstance(raw, list):
            raise reader.error(("initial_poses",), "expected a list")
        poses = []
        for i, item in enumerate(raw):
            item = reader.mapping(item, ("initial_poses", i), {"east_m", "north_m", "heading_rad"})
            try:
                poses.append(Pose(
                    EnuPoint(
                        reader.number(item.get("east_m", 0.0), ("initial_poses", i, "east_m")),
                        reader.number(item.get("north_m", 0.0), ("initial_poses", i, "north_m")),
                        0.0,
                    ),
                    wrap_to_2pi(reader.number(item.get("heading_rad", 0.0), ("initial_poses", i, "heading_rad"))),
                    0.0,
                ))
            except InvalidInputError as exc:
                raise reader.error(("initial_poses", i), str(exc)) from None
        kw["initial_poses"] = tuple(poses)

    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        fld = exc.field or ""
        path = tuple(fld.split(".")) if fld and " " not in fld else ()
        raise reader.error(path, str(exc).split(": ", 1)[-1]) from None


def parse_scenario(text: str, source: Optional[str] = None) -> ScenarioConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line=line, source=source) from None
    lines = _line_map(node) if node is not None else {}
    return scenario_from_dict(data or {}, lines, source)


def bundled_scenario_path(name: str = "paper-repro") -> Path:
    return Path(str(resources.files("convoykit") / "scenarios" / f"{name}.yaml"))


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (e.g. ``paper-repro``)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED_SCENARIOS:
        p = bundled_scenario_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc.strerror}", source=str(p)) from None
    return parse_scenario(text, source=str(p))
