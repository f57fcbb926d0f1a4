"""JSON configuration: schema, layered loading and conversion to model objects.

Configuration files are deep-merged, in order, over the built-in JUWELS
Booster document, so a file only needs the keys it changes. A fit written by
``boostersim calibrate`` is such a fragment.
"""

from __future__ import annotations

import copy
import json
import os
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from boostersim.calibration import PARAMETERS, Measurement
from boostersim.collectives import ALGORITHMS, POLICIES
from boostersim.errors import ConfigError, ModelError
from boostersim.hardware import GPU_PRESETS, GpuSpec, NodeSpec, Precision, SystemSpec
from boostersim.topology import TopologySpec
from boostersim.workload import JobSpec, ModelSpec

ENV_VAR = "BOOSTERSIM_CONFIG"
SYSTEM_PRESETS = ("juwels_booster",)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TopologyConfig(_Strict):
    num_nodes: int = Field(ge=1)
    nodes_per_cell: int = Field(ge=1)
    intercell_links_per_pair: int = Field(10, ge=1)
    link_bandwidth: float = Field(200e9, gt=0)
    intra_cell_levels: Literal[2] = 2
    nics_per_node: int = Field(4, ge=1)
    nic_bandwidth: float = Field(200e9, gt=0)
    intra_node_bandwidth: float = Field(300e9, gt=0)
    switch_hop_latency: float = Field(150e-9, ge=0)
    nic_latency: float = Field(1e-6, ge=0)
    hosts_per_leaf: Optional[int] = Field(None, ge=1)
    spines_per_cell: Optional[int] = Field(None, ge=1)

    def to_spec(self) -> TopologySpec:
        return TopologySpec(**self.model_dump())


class GpuConfig(_Strict):
    name: str
    peak_flops: dict[Precision, float]
    tdp: float = Field(gt=0)
    memory: float = Field(gt=0)


class SystemConfig(_Strict):
    preset: Optional[str] = None
    gpu: Union[str, GpuConfig] = "A100-40GB"
    gpus_per_node: int = Field(4, ge=1)
    host_memory: float = Field(512e9, gt=0)
    topology: TopologyConfig

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, v):
        if v is not None and v not in SYSTEM_PRESETS:
            raise ValueError(f"unknown system preset {v!r}; known: {', '.join(SYSTEM_PRESETS)}")
        return v

    @field_validator("gpu")
    @classmethod
    def _known_gpu(cls, v):
        if isinstance(v, str) and v not in GPU_PRESETS:
            raise ValueError(f"unknown GPU preset {v!r}; known: {', '.join(GPU_PRESETS)}")
        return v

    def to_spec(self) -> SystemSpec:
        if isinstance(self.gpu, str):
            gpu = GPU_PRESETS[self.gpu]
        else:
            gpu = GpuSpec(**self.gpu.model_dump())
        topo = self.topology.to_spec()
        node = NodeSpec(
            gpu=gpu,
            gpus_per_node=self.gpus_per_node,
            nics_per_node=topo.nics_per_node,
            nic_bandwidth=topo.nic_bandwidth,
            intra_node_bandwidth=topo.intra_node_bandwidth,
            host_memory=self.host_memory,
        )
        return SystemSpec(node=node, num_nodes=topo.num_nodes, topology=topo, name=self.preset or "custom")


class ModelConfig(_Strict):
    parameter_count: int = Field(gt=0)
    flops_per_sample: float = Field(gt=0)
    gradient_precision: Precision = Precision.FP32
    compute_precision: Precision = Precision.TF32_TC
    note: Optional[str] = None


class WorkloadConfig(_Strict):
    model: str
    per_device_batch: int = Field(ge=1)
    dataset_samples: int = Field(ge=1)
    epochs: int = Field(1, ge=0)
    devices: list[int] = Field(default_factory=list)
    placement: Literal[POLICIES] = "packed"  # type: ignore[valid-type]
    overlap: float = Field(0.0, ge=0, le=1)
    io_bandwidth: float = Field(0.0, ge=0)
    bytes_per_sample: float = Field(0.0, ge=0)
    compute_efficiency: float = Field(0.5, gt=0, le=1)
    algorithm: Literal[ALGORITHMS] = "hierarchical"  # type: ignore[valid-type]
    alpha: Optional[float] = Field(None, ge=0)
    beta: Optional[float] = Field(None, gt=0)
    gradient_compression: Optional[Precision] = None
    bn_sync_bytes: float = Field(0.0, ge=0)
    bn_sync_group: int = Field(0, ge=0)
    note: Optional[str] = None

    @field_validator("devices")
    @classmethod
    def _positive_counts(cls, v):
        if any(p < 1 for p in v):
            raise ValueError("device counts must be >= 1")
        return v


class PointConfig(_Strict):
    p: int = Field(ge=1)
    time_s: float = Field(gt=0)
    spread_s: Optional[float] = Field(None, ge=0)


class MeasurementConfig(_Strict):
    workload: str
    kind: Literal["epoch", "step"] = "epoch"
    points: list[PointConfig] = Field(default_factory=list)
    fit: list[list[str]] = Field(default_factory=lambda: [["eta"], ["alpha", "beta"]])
    bounds: dict[str, tuple[float, float]] = Field(default_factory=dict)

    @field_validator("fit")
    @classmethod
    def _known_params(cls, v):
        for stage in v:
            bad = [p for p in stage if p not in PARAMETERS]
            if bad or not stage:
                raise ValueError(f"fit stages must name parameters from {PARAMETERS}")
        return v

    @field_validator("bounds")
    @classmethod
    def _known_bounds(cls, v):
        bad = [p for p in v if p not in PARAMETERS]
        if bad:
            raise ValueError(f"bounds given for unknown parameters {bad}")
        return v


class OutputConfig(_Strict):
    format: Literal["csv", "json", "text"] = "csv"


class Config(_Strict):
    system: SystemConfig
    models: dict[str, ModelConfig] = Field(default_factory=dict)
    workloads: dict[str, WorkloadConfig] = Field(default_factory=dict)
    measurements: dict[str, MeasurementConfig] = Field(default_factory=dict)
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _references_resolve(self):
        for name, w in self.workloads.items():
            if w.model not in self.models:
                raise ValueError(f"workloads.{name}.model: unknown model {w.model!r}")
        for name, m in self.measurements.items():
            if m.workload not in self.workloads:
                raise ValueError(f"measurements.{name}.workload: unknown workload {m.workload!r}")
        try:
            system = self.system.to_spec()
        except ModelError as exc:
            raise ValueError(f"system: {exc}") from None
        for name in self.workloads:
            try:
                self.job(name)
            except ModelError as exc:
                raise ValueError(f"workloads.{name}: {exc}") from None
            too_big = [p for p in self.workloads[name].devices if p > system.total_devices]
            if too_big:
                raise ValueError(f"workloads.{name}.devices: {too_big} exceed {system.total_devices} devices")
        return self

    def system_spec(self) -> SystemSpec:
        return self.system.to_spec()

    def model_spec(self, name: str) -> ModelSpec:
        m = self.models[name]
        return ModelSpec(
            name=name,
            parameter_count=m.parameter_count,
            flops_per_sample=m.flops_per_sample,
            gradient_precision=m.gradient_precision,
            compute_precision=m.compute_precision,
        )

    def job(self, name: str, devices: int | None = None) -> JobSpec:
        if name not in self.workloads:
            raise ConfigError(f"unknown workload {name!r}", [f"known: {', '.join(sorted(self.workloads))}"])
        w = self.workloads[name]
        if devices is None:
            devices = min(w.devices) if w.devices else 1
        fields = w.model_dump(exclude={"model", "devices", "note"})
        return JobSpec(model=self.model_spec(w.model), devices=devices, name=name, **fields)

    def measurement_points(self, name: str) -> list[Measurement]:
        if name not in self.measurements:
            raise ConfigError(
                f"unknown measurement set {name!r}", [f"known: {', '.join(sorted(self.measurements))}"]
            )
        m = self.measurements[name]
        return [Measurement(pt.p, pt.time_s, m.kind, pt.spread_s) for pt in m.points]


def builtin_document() -> dict[str, Any]:
    text = resources.files("boostersim").joinpath("data/juwels_booster.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, overlay: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_json(path: str | os.PathLike) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}", [str(exc)]) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON", [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _diagnostics(exc: ValidationError) -> list[str]:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return lines


def validate_document(doc: dict[str, Any], source: str = "config") -> Config:
    try:
        return Config.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{source} failed validation", _diagnostics(exc)) from None


def load_config(paths: list[str | os.PathLike] | None = None) -> Config:
    """Built-in defaults, overlaid by ``paths`` (or ``$BOOSTERSIM_CONFIG``) in order."""
    if not paths:
        env = os.environ.get(ENV_VAR)
        paths = [env] if env else []
    doc = builtin_document()
    for p in paths:
        doc = deep_merge(doc, read_json(p))
    source = ", ".join(str(p) for p in paths) or "built-in config"
    return validate_document(doc, source)


def load_topology(path: str | os.PathLike) -> TopologySpec:
    """Read a stand-alone topology document (the ``system.topology`` schema)."""
    doc = read_json(path)
    try:
        return TopologyConfig.model_validate(doc).to_spec()
    except ValidationError as exc:
        raise ConfigError(f"{path} failed validation", _diagnostics(exc)) from None
