"""Analytical performance model for data-parallel training on a DragonFly+ GPU cluster."""

from boostersim.errors import BoosterSimError, CalibrationError, ConfigError, ModelError
from boostersim.hardware import (
    A100_40GB,
    GpuSpec,
    NodeSpec,
    Precision,
    SystemSpec,
    energy_efficiency,
    juwels_booster,
    peak_flops,
    system_peak,
)
from boostersim.topology import (
    NetworkGraph,
    Path,
    TopologySpec,
    bisection_bandwidth,
    build_dragonfly_plus,
    path_latency,
    route,
)

__version__ = "0.1.0"

__all__ = [
    "A100_40GB",
    "BoosterSimError",
    "CalibrationError",
    "ConfigError",
    "GpuSpec",
    "ModelError",
    "NetworkGraph",
    "NodeSpec",
    "Path",
    "Precision",
    "SystemSpec",
    "TopologySpec",
    "bisection_bandwidth",
    "build_dragonfly_plus",
    "energy_efficiency",
    "juwels_booster",
    "path_latency",
    "peak_flops",
    "route",
    "system_peak",
]
