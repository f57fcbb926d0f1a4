"""GPU, node and system capability tables."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from boostersim.errors import ModelError
from boostersim.topology import TopologySpec

TERA = 1e12
GIGA = 1e9


class Precision(str, enum.Enum):
    FP64 = "FP64"
    FP64_TC = "FP64_TC"
    FP32 = "FP32"
    TF32_TC = "TF32_TC"
    FP16 = "FP16"
    FP16_TC = "FP16_TC"

    @property
    def bytes_per_element(self) -> int:
        return _BYTES[self]

    @classmethod
    def parse(cls, value: str | Precision) -> Precision:
        if isinstance(value, Precision):
            return value
        try:
            return cls(value.upper())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ModelError(f"unknown precision {value!r} (expected one of {names})") from None


_BYTES = {
    Precision.FP64: 8,
    Precision.FP64_TC: 8,
    Precision.FP32: 4,
    Precision.TF32_TC: 4,
    Precision.FP16: 2,
    Precision.FP16_TC: 2,
}


@dataclass(frozen=True)
class GpuSpec:
    name: str
    peak_flops: Mapping[Precision, float]
    tdp: float
    memory: float

    def __post_init__(self):
        table = MappingProxyType({Precision.parse(k): float(v) for k, v in self.peak_flops.items()})
        object.__setattr__(self, "peak_flops", table)
        if self.tdp <= 0:
            raise ModelError(f"{self.name}: tdp must be positive, got {self.tdp}")
        if any(v < 0 for v in table.values()):
            raise ModelError(f"{self.name}: peak rates must be non-negative")
        # ordering only checked over the precisions actually present
        chain = [table.get(p) for p in (Precision.FP16_TC, Precision.FP32, Precision.FP64)]
        present = [v for v in chain if v is not None]
        if any(a < b for a, b in zip(present, present[1:])):
            raise ModelError(f"{self.name}: expected FP16_TC >= FP32 >= FP64 peak rates")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.peak_flops.items())), self.tdp, self.memory))


# Vendor peak rates for the 40 GB A100, 400 W TDP.
A100_40GB = GpuSpec(
    name="A100-40GB",
    peak_flops={
        Precision.FP64: 9.7 * TERA,
        Precision.FP64_TC: 19.5 * TERA,
        Precision.FP32: 19.5 * TERA,
        Precision.FP16: 78 * TERA,
        Precision.TF32_TC: 156 * TERA,
        Precision.FP16_TC: 312 * TERA,
    },
    tdp=400.0,
    memory=40 * GIGA,
)

GPU_PRESETS = {A100_40GB.name: A100_40GB}


@dataclass(frozen=True)
class NodeSpec:
    gpu: GpuSpec
    gpus_per_node: int = 4
    nics_per_node: int = 4
    nic_bandwidth: float = 200e9  # bits/s per direction
    intra_node_bandwidth: float = 300e9  # bytes/s GPU to GPU
    host_memory: float = 512 * GIGA

    def __post_init__(self):
        if self.gpus_per_node < 1:
            raise ModelError("gpus_per_node must be >= 1")
        if self.nics_per_node < 1:
            raise ModelError("nics_per_node must be >= 1")
        if self.nic_bandwidth <= 0 or self.intra_node_bandwidth <= 0:
            raise ModelError("node bandwidths must be positive")


@dataclass(frozen=True)
class SystemSpec:
    node: NodeSpec
    num_nodes: int
    topology: TopologySpec
    name: str = field(default="system", compare=False)

    def __post_init__(self):
        if self.num_nodes != self.topology.num_nodes:
            raise ModelError(
                f"num_nodes ({self.num_nodes}) disagrees with topology ({self.topology.num_nodes})"
            )
        if self.node.nics_per_node != self.topology.nics_per_node:
            raise ModelError("nics_per_node differs between node and topology")
        if self.node.nic_bandwidth != self.topology.nic_bandwidth:
            raise ModelError("nic_bandwidth differs between node and topology")
        if self.node.intra_node_bandwidth != self.topology.intra_node_bandwidth:
            raise ModelError("intra_node_bandwidth differs between node and topology")

    @property
    def total_devices(self) -> int:
        return self.num_nodes * self.node.gpus_per_node

    @property
    def gpu(self) -> GpuSpec:
        return self.node.gpu


def peak_flops(gpu: GpuSpec, precision: Precision | str) -> float:
    precision = Precision.parse(precision)
    try:
        return gpu.peak_flops[precision]
    except KeyError:
        raise ModelError(f"{gpu.name} has no peak rate for {precision.value}") from None


def system_peak(system: SystemSpec, precision: Precision | str) -> float:
    return system.num_nodes * system.node.gpus_per_node * peak_flops(system.gpu, precision)


def energy_efficiency(flops: float, power: float) -> float:
    """Flop/s per watt."""
    if power <= 0:
        raise ModelError(f"power must be positive, got {power}")
    return flops / power


def juwels_booster(**topology_overrides) -> SystemSpec:
    """936 nodes of 4x A100, four HDR200 NICs each, 48-node DragonFly+ cells."""
    topo = TopologySpec(
        num_nodes=936,
        nodes_per_cell=48,
        intercell_links_per_pair=10,
        link_bandwidth=200e9,
        nics_per_node=4,
        nic_bandwidth=200e9,
        intra_node_bandwidth=300e9,
        **topology_overrides,
    )
    node = NodeSpec(
        gpu=A100_40GB,
        gpus_per_node=4,
        nics_per_node=topo.nics_per_node,
        nic_bandwidth=topo.nic_bandwidth,
        intra_node_bandwidth=topo.intra_node_bandwidth,
        host_memory=512 * GIGA,
    )
    return SystemSpec(node=node, num_nodes=topo.num_nodes, topology=topo, name="juwels_booster")
