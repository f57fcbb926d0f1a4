"""Executable reproduction cases for the published JUWELS Booster figures."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from boostersim.calibration import fit_stages
from boostersim.config import Config
from boostersim.hardware import Precision, energy_efficiency, peak_flops, system_peak
from boostersim.topology import bisection_bandwidth, build_dragonfly_plus
from boostersim.workload import epoch_time, scaling_efficiency


@dataclass
class CaseResult:
    name: str
    passed: bool = True
    lines: list[str] = field(default_factory=list)
    seconds: float = 0.0

    def check(self, ok: bool, text: str) -> None:
        self.passed = self.passed and ok
        self.lines.append(f"[{'ok' if ok else 'FAIL'}] {text}")

    def note(self, text: str) -> None:
        self.lines.append(f"       {text}")

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _close(x: float, target: float, rel: float = 5e-5) -> bool:
    return abs(x - target) <= rel * abs(target)


def case_bisection(cfg: Config) -> CaseResult:
    res = CaseResult("bisection")
    t0 = time.perf_counter()
    spec = cfg.system_spec().topology
    graph = build_dragonfly_plus(spec)
    bw = bisection_bandwidth(graph)
    res.seconds = time.perf_counter() - t0
    c = graph.num_cells
    half = c // 2
    res.note(f"{spec.num_nodes} nodes / {spec.nodes_per_cell} per cell -> {c} cells")
    res.note(
        f"{half} x {c - half} cell pairs x {spec.intercell_links_per_pair} links x "
        f"{spec.link_bandwidth / 1e9:g} Gbit/s x 2 directions = {bw / 1e12:g} Tbit/s"
    )
    res.check(bw == 400e12, f"bisection bandwidth {bw / 1e12:g} Tbit/s == 400 Tbit/s")
    res.check(res.seconds < 1.0, f"runtime {res.seconds:.3f} s < 1 s")
    return res


def case_peaks(cfg: Config) -> CaseResult:
    res = CaseResult("peaks")
    t0 = time.perf_counter()
    system = cfg.system_spec()
    peak = system_peak(system, Precision.FP64_TC)
    gpu_peak = peak_flops(system.gpu, Precision.FP64_TC)
    eff = energy_efficiency(gpu_peak, system.gpu.tdp)
    res.seconds = time.perf_counter() - t0
    res.note(
        f"{system.total_devices} GPUs x {gpu_peak / 1e12:g} Tflop/s FP64_TC = {peak / 1e15:.6g} Pflop/s"
    )
    res.check(_close(peak, 73.008e15), f"system FP64_TC peak {peak / 1e15:.5g} Pflop/s == 73.008 Pflop/s")
    res.note(f"{gpu_peak / 1e12:g} Tflop/s / {system.gpu.tdp:g} W = {eff / 1e9:.6g} Gflop/s/W")
    res.check(_close(eff, 48.75e9), f"peak efficiency {eff / 1e9:.4g} Gflop/s/W == 48.75 Gflop/s/W")
    return res


def case_bigearthnet(cfg: Config) -> CaseResult:
    res = CaseResult("bigearthnet")
    t0 = time.perf_counter()
    system = cfg.system_spec()
    mset = cfg.measurements["bigearthnet_scaling"]
    job = cfg.job(mset.workload)
    points = cfg.measurement_points("bigearthnet_scaling")
    fits = fit_stages(points, job, system, mset.fit, mset.bounds)
    fitted = fits[-1].job
    gpn = system.node.gpus_per_node
    base = min(points, key=lambda m: m.p)
    predicted = epoch_time(fitted.with_devices(64 * gpn), system)
    eff = scaling_efficiency(base.time_s, base.p // gpn, predicted, 64)
    res.seconds = time.perf_counter() - t0
    for f in fits:
        res.note("fit " + ", ".join(f"{k}={v:.4g}" for k, v in f.values.items()) + f" (rms rel. err {f.residual:.2e})")
    res.check(45 <= predicted <= 55, f"64-node epoch {predicted:.2f} s in [45, 55] s")
    res.check(0.75 <= eff <= 0.85, f"predicted efficiency 1 -> 64 nodes {eff:.3f} in [0.75, 0.85]")
    exact = scaling_efficiency(2550, 1, 50, 64)
    res.check(abs(exact - 0.797) <= 0.001, f"efficiency(2550 s x 1, 50 s x 64) = {exact:.4f} ~ 0.797")
    res.check(res.seconds < 1.0, f"runtime {res.seconds:.3f} s < 1 s")
    return res


def case_convlstm(cfg: Config) -> CaseResult:
    res = CaseResult("convlstm")
    t0 = time.perf_counter()
    system = cfg.system_spec()
    mset = cfg.measurements["convlstm_scaling"]
    job = cfg.job(mset.workload)
    points = cfg.measurement_points("convlstm_scaling")
    fits = fit_stages(points, job, system, mset.fit, mset.bounds)
    final = fits[-1]
    base = min(points, key=lambda m: m.p)
    predicted = epoch_time(final.job.with_devices(16), system)
    eff = scaling_efficiency(base.time_s, base.p, predicted, 16)
    res.seconds = time.perf_counter() - t0
    for f in fits:
        res.note("fit " + ", ".join(f"{k}={v:.4g}" for k, v in f.values.items()) + f" (rms rel. err {f.residual:.2e})")
    res.check(abs(eff - 0.90) <= 0.02, f"16-GPU efficiency {eff:.4f} = 0.90 +/- 0.02")
    res.check(final.residual < 0.02, f"calibration residual {final.residual:.2e} < 2%")
    res.check(res.seconds < 10.0, f"runtime {res.seconds:.3f} s < 10 s")
    return res


CASES: dict[str, Callable[[Config], CaseResult]] = {
    "bisection": case_bisection,
    "peaks": case_peaks,
    "bigearthnet": case_bigearthnet,
    "convlstm": case_convlstm,
}


def run_cases(cfg: Config, names=None) -> list[CaseResult]:
    return [CASES[n](cfg) for n in (names or CASES)]
