"""Step, epoch and time-to-train prediction for data-parallel jobs, plus scaling sweeps."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

from boostersim.collectives import (
    ALGORITHMS,
    HIERARCHICAL,
    PACKED,
    POLICIES,
    CollectiveParams,
    allreduce_time,
    comm_environment,
    compressed_bytes,
    make_placement,
    ring_allreduce_time,
)
from boostersim.errors import ModelError
from boostersim.hardware import Precision, SystemSpec, peak_flops

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    parameter_count: int
    flops_per_sample: float  # forward + backward
    gradient_precision: Precision = Precision.FP32
    compute_precision: Precision = Precision.TF32_TC

    def __post_init__(self):
        if self.parameter_count <= 0:
            raise ModelError(f"{self.name}: parameter_count must be positive")
        if self.flops_per_sample <= 0:
            raise ModelError(f"{self.name}: flops_per_sample must be positive")
        object.__setattr__(self, "gradient_precision", Precision.parse(self.gradient_precision))
        object.__setattr__(self, "compute_precision", Precision.parse(self.compute_precision))

    @property
    def gradient_bytes(self) -> float:
        return self.parameter_count * self.gradient_precision.bytes_per_element


@dataclass(frozen=True)
class JobSpec:
    model: ModelSpec
    devices: int
    per_device_batch: int
    dataset_samples: int
    epochs: int = 1
    placement: str = PACKED
    overlap: float = 0.0
    io_bandwidth: float = 0.0  # bytes/s per device, 0 disables the term
    bytes_per_sample: float = 0.0
    compute_efficiency: float = 0.5
    algorithm: str = HIERARCHICAL
    alpha: float | None = None  # None: derived from routed path latency
    beta: float | None = None  # None: one idle NIC
    gradient_compression: Precision | None = None
    bn_sync_bytes: float = 0.0  # 0 disables batch-norm statistics sync
    bn_sync_group: int = 0  # ranks per sync group, 0 means all
    name: str = "job"

    def __post_init__(self):
        if self.devices < 1:
            raise ModelError("devices must be >= 1")
        if self.per_device_batch < 1:
            raise ModelError("per_device_batch must be >= 1")
        if self.dataset_samples < self.devices * self.per_device_batch:
            raise ModelError(
                f"{self.name}: dataset of {self.dataset_samples} samples cannot fill one step "
                f"of {self.devices} x {self.per_device_batch}"
            )
        if self.epochs < 0:
            raise ModelError("epochs must be >= 0")
        if self.placement not in POLICIES:
            raise ModelError(f"unknown placement policy {self.placement!r}")
        if self.algorithm not in ALGORITHMS:
            raise ModelError(f"unknown algorithm {self.algorithm!r}")
        if not 0 <= self.overlap <= 1:
            raise ModelError("overlap must lie in [0, 1]")
        if not 0 < self.compute_efficiency <= 1:
            raise ModelError("compute_efficiency must lie in (0, 1]")
        if self.io_bandwidth < 0 or self.bytes_per_sample < 0:
            raise ModelError("io terms must be non-negative")
        if self.alpha is not None and self.alpha < 0:
            raise ModelError("alpha must be >= 0")
        if self.beta is not None and self.beta <= 0:
            raise ModelError("beta must be > 0")
        if self.bn_sync_bytes < 0 or self.bn_sync_group < 0:
            raise ModelError("batch-norm sync settings must be non-negative")
        if self.gradient_compression is not None:
            object.__setattr__(self, "gradient_compression", Precision.parse(self.gradient_compression))

    @property
    def global_batch(self) -> int:
        return self.devices * self.per_device_batch

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(self.dataset_samples / self.global_batch)

    def with_devices(self, devices: int) -> JobSpec:
        return dataclasses.replace(self, devices=devices)


@dataclass(frozen=True)
class StepBreakdown:
    compute: float
    comm: float
    exposed_comm: float
    io: float

    @property
    def total(self) -> float:
        return self.compute + self.exposed_comm + self.io


@lru_cache(maxsize=1024)
def _placement(topology, gpus_per_node, p, policy):
    return make_placement(p, gpus_per_node, topology, policy)


def _comm_time(job: JobSpec, system: SystemSpec) -> float:
    p = job.devices
    if p == 1:
        return 0.0
    topo = system.topology
    gpn = system.node.gpus_per_node
    env = comm_environment(topo, gpn, p, job.placement, job.algorithm)
    alpha = env.default_alpha if job.alpha is None else job.alpha
    base_beta = 8 / topo.nic_bandwidth if job.beta is None else job.beta
    beta = base_beta * env.contention_factor

    factor = 1.0
    grad = job.model.gradient_precision
    if job.gradient_compression is not None:
        factor = compressed_bytes(1.0, grad, job.gradient_compression)
        if factor > 1:
            raise ModelError(f"compression to {job.gradient_compression.value} would grow the message")
    params = CollectiveParams(job.algorithm, p, job.model.gradient_bytes, alpha, beta, factor)
    t = allreduce_time(params, system.node, _placement(topo, gpn, p, job.placement))

    if job.bn_sync_bytes > 0:
        group = min(job.bn_sync_group or p, p)
        t += ring_allreduce_time(CollectiveParams("ring", group, job.bn_sync_bytes, alpha, beta))
    return t


def step_breakdown(job: JobSpec, system: SystemSpec) -> StepBreakdown:
    if job.devices > system.total_devices:
        raise ModelError(f"job asks for {job.devices} devices, system has {system.total_devices}")
    rate = job.compute_efficiency * peak_flops(system.gpu, job.model.compute_precision)
    compute = job.per_device_batch * job.model.flops_per_sample / rate
    comm = _comm_time(job, system)
    io = 0.0
    if job.io_bandwidth > 0:
        io = job.per_device_batch * job.bytes_per_sample / job.io_bandwidth
    exposed = max(0.0, comm - job.overlap * compute)
    return StepBreakdown(compute=compute, comm=comm, exposed_comm=exposed, io=io)


def step_time(job: JobSpec, system: SystemSpec) -> float:
    return step_breakdown(job, system).total


def epoch_time(job: JobSpec, system: SystemSpec) -> float:
    return job.steps_per_epoch * step_time(job, system)


def time_to_train(job: JobSpec, system: SystemSpec) -> float:
    if job.epochs == 0:
        return 0.0
    return job.epochs * epoch_time(job, system)


def scaling_efficiency(t_base: float, p_base: int, t_p: float, p: int) -> float:
    """Strong-scaling efficiency at fixed work per epoch."""
    if min(t_base, p_base, t_p, p) <= 0:
        raise ModelError("scaling efficiency needs positive times and counts")
    if p < p_base:
        raise ModelError(f"device count {p} below baseline {p_base}")
    return (t_base * p_base) / (t_p * p)


@dataclass(frozen=True)
class ScalingRow:
    p: int
    step_time: float
    epoch_time: float
    samples_per_second: float
    efficiency: float
    ideal_epoch_time: float

    @property
    def flagged(self) -> bool:
        return self.efficiency > 1.0


@dataclass(frozen=True)
class ScalingReport:
    job: str
    rows: tuple[ScalingRow, ...] = field(default=())

    @property
    def baseline(self) -> ScalingRow:
        return self.rows[0]


def sweep(job: JobSpec, counts, system: SystemSpec) -> ScalingReport:
    counts = sorted(set(counts))
    if not counts:
        raise ModelError("sweep needs at least one device count")
    bad = [c for c in counts if not 1 <= c <= system.total_devices]
    if bad:
        raise ModelError(f"device counts outside 1..{system.total_devices}: {bad}")

    rows = []
    base_p = counts[0]
    base_epoch = None
    for p in counts:
        j = job.with_devices(p)
        t_step = step_time(j, system)
        t_epoch = j.steps_per_epoch * t_step
        if base_epoch is None:
            base_epoch = t_epoch
        eff = scaling_efficiency(base_epoch, base_p, t_epoch, p)
        rows.append(
            ScalingRow(
                p=p,
                step_time=t_step,
                epoch_time=t_epoch,
                samples_per_second=j.global_batch / t_step,
                efficiency=eff,
                ideal_epoch_time=base_epoch * base_p / p,
            )
        )
        if eff > 1.0:
            log.warning("%s: efficiency %.4f above 1 at p=%d (step rounding)", job.name, eff, p)
    return ScalingReport(job=job.name, rows=tuple(rows))
