from .engine import VehicleAgent, run_multicast, run_scenario
from .plant import PlantParams, Pose, bicycle_step
from .scenario import ScenarioConfig, VehicleSpec, load_scenario, parse_scenario
from .trace import Trace, TraceRow, VehicleTick

__all__ = [
    "PlantParams",
    "Pose",
    "ScenarioConfig",
    "Trace",
    "TraceRow",
    "VehicleAgent",
    "VehicleSpec",
    "VehicleTick",
    "bicycle_step",
    "load_scenario",
    "parse_scenario",
    "run_multicast",
    "run_scenario",
]
