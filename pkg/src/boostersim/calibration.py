"""Fit free model parameters to measured step or epoch times.

The search is a deterministic grid refinement: a coarse grid (log-spaced for
strictly positive bounds, linear otherwise) is laid over the box, the best
point becomes the new centre, and the box shrinks around it. The budget is a
fixed number of rounds so a fit always costs the same and always returns the
same answer for the same inputs. The grid optimum is then polished with a
bounded least-squares solve, which follows narrow valleys the grid cannot.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from scipy.optimize import least_squares

from boostersim.errors import CalibrationError, ModelError
from boostersim.hardware import SystemSpec
from boostersim.workload import JobSpec, epoch_time, step_time

PARAMETERS = ("alpha", "beta", "eta", "overlap")

# JobSpec field behind each fit parameter
_FIELDS = {"alpha": "alpha", "beta": "beta", "eta": "compute_efficiency", "overlap": "overlap"}

DEFAULT_BOUNDS = {
    "alpha": (1e-9, 1.0),
    "beta": (1e-13, 1e-6),
    "eta": (1e-4, 1.0),
    "overlap": (0.0, 1.0),
}

_GRID_POINTS = {1: 21, 2: 11, 3: 7, 4: 5}


@dataclass(frozen=True)
class Measurement:
    p: int
    time_s: float
    kind: str = "epoch"  # or "step"
    spread_s: float | None = None  # optional observed dispersion, echoed only

    def __post_init__(self):
        if self.p < 1:
            raise ModelError("measurement device count must be >= 1")
        if not self.time_s > 0:
            raise ModelError("measured times must be positive")
        if self.kind not in ("epoch", "step"):
            raise ModelError(f"unknown measurement kind {self.kind!r}")


@dataclass(frozen=True)
class FitPoint:
    p: int
    observed: float
    predicted: float
    spread_s: float | None = None

    @property
    def relative_error(self) -> float:
        return (self.predicted - self.observed) / self.observed


@dataclass(frozen=True)
class FitResult:
    values: Mapping[str, float]  # fitted parameters only
    residual: float  # RMS relative error
    points: tuple[FitPoint, ...]
    job: JobSpec  # template with the fitted values applied

    @property
    def alpha(self) -> float | None:
        return self.job.alpha

    @property
    def beta(self) -> float | None:
        return self.job.beta

    @property
    def eta(self) -> float:
        return self.job.compute_efficiency

    @property
    def overlap(self) -> float:
        return self.job.overlap


def apply_parameters(job: JobSpec, values: Mapping[str, float]) -> JobSpec:
    return dataclasses.replace(job, **{_FIELDS[k]: v for k, v in values.items()})


def predict(job: JobSpec, system: SystemSpec, m: Measurement) -> float:
    j = job.with_devices(m.p)
    return epoch_time(j, system) if m.kind == "epoch" else step_time(j, system)


def _validate_bounds(free: Sequence[str], bounds: Mapping[str, tuple[float, float]]):
    out = {}
    for name in free:
        lo, hi = bounds.get(name, DEFAULT_BOUNDS[name])
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise CalibrationError(f"invalid bounds for {name}: ({lo}, {hi})")
        if name == "eta" and not (0 < lo and hi <= 1):
            raise CalibrationError("eta bounds must lie in (0, 1]")
        if name == "overlap" and not (0 <= lo and hi <= 1):
            raise CalibrationError("overlap bounds must lie in [0, 1]")
        if name == "alpha" and lo < 0:
            raise CalibrationError("alpha bounds must be non-negative")
        if name == "beta" and lo <= 0:
            raise CalibrationError("beta bounds must be positive")
        out[name] = (float(lo), float(hi))
    return out


class _Axis:
    """One parameter's search coordinate (log10 when the range is positive)."""

    def __init__(self, lo: float, hi: float):
        self.log = lo > 0
        self.lo, self.hi = (math.log10(lo), math.log10(hi)) if self.log else (lo, hi)

    def value(self, u: float) -> float:
        return 10.0**u if self.log else u

    def grid(self, centre: float, half: float, n: int) -> list[float]:
        a, b = max(self.lo, centre - half), min(self.hi, centre + half)
        if n == 1 or a == b:
            return [centre]
        return [a + (b - a) * i / (n - 1) for i in range(n)]


def fit(
    measurements: Iterable[Measurement],
    job: JobSpec,
    system: SystemSpec,
    free_params: Sequence[str] = ("alpha", "beta"),
    bounds: Mapping[str, tuple[float, float]] | None = None,
    rounds: int = 48,
) -> FitResult:
    """Minimise the summed squared relative error of predicted vs observed times.

    Ties between equally good points go to the lexicographically smallest
    parameter vector, so neither measurement order nor evaluation order can
    change the answer.
    """
    points = sorted(measurements, key=lambda m: (m.p, m.kind, m.time_s))
    free = list(dict.fromkeys(free_params))
    unknown = [f for f in free if f not in PARAMETERS]
    if unknown:
        raise CalibrationError(f"unknown fit parameters {unknown}; choose from {PARAMETERS}")
    if not free:
        raise CalibrationError("nothing to fit")
    if len(points) < len(free):
        raise CalibrationError(
            f"underdetermined: {len(points)} measurement(s) for {len(free)} free parameter(s)"
        )
    free = [p for p in PARAMETERS if p in free]
    box = _validate_bounds(free, bounds or {})
    axes = [_Axis(*box[name]) for name in free]

    def residuals(u) -> list[float] | None:
        values = {name: ax.value(x) for name, ax, x in zip(free, axes, u)}
        try:
            trial = apply_parameters(job, values)
            return [(predict(trial, system, m) - m.time_s) / m.time_s for m in points]
        except ModelError:
            return None

    def objective(u: tuple[float, ...]) -> float:
        r = residuals(u)
        return math.inf if r is None else sum(x * x for x in r)

    n = _GRID_POINTS.get(len(free), 5)
    centre = tuple((ax.lo + ax.hi) / 2 for ax in axes)
    half = [(ax.hi - ax.lo) / 2 for ax in axes]
    best = (objective(centre), centre)
    for _ in range(rounds):
        grids = [ax.grid(c, h, n) for ax, c, h in zip(axes, centre, half)]
        for u in itertools.product(*grids):
            cand = (objective(u), u)
            if cand < best:
                best = cand
        moved = best[1] != centre
        centre = best[1]
        half = [h * (0.85 if moved else 0.5) for h in half]

    sse, u = best
    if not math.isfinite(sse):
        raise CalibrationError("no feasible parameter point within bounds")
    if sse > 0:
        best = min(best, _polish(residuals, objective, u, axes))
        sse, u = best
    values = {name: ax.value(x) for name, ax, x in zip(free, axes, u)}
    fitted = apply_parameters(job, values)
    fit_points = tuple(
        FitPoint(m.p, m.time_s, predict(fitted, system, m), m.spread_s) for m in points
    )
    residual = math.sqrt(sum(fp.relative_error**2 for fp in fit_points) / len(fit_points))
    return FitResult(values=values, residual=residual, points=fit_points, job=fitted)


def _polish(residuals, objective, u, axes):
    lo = [ax.lo for ax in axes]
    hi = [ax.hi for ax in axes]
    start = [min(max(x, a), b) for x, a, b in zip(u, lo, hi)]
    if any(a == b for a, b in zip(lo, hi)):
        return objective(tuple(u)), tuple(u)
    # infeasible points get a large finite penalty so the solver can back off
    big = [1e6] * len(residuals(u))
    sol = least_squares(lambda v: residuals(v) or big, start, bounds=(lo, hi), method="trf",
                        x_scale="jac", xtol=1e-12, ftol=1e-15, gtol=1e-15, max_nfev=400)
    v = tuple(float(x) for x in sol.x)
    return objective(v), v


def fit_stages(
    measurements: Sequence[Measurement],
    job: JobSpec,
    system: SystemSpec,
    stages: Sequence[Sequence[str]],
    bounds: Mapping[str, tuple[float, float]] | None = None,
) -> list[FitResult]:
    """Run several fits in sequence, each starting from the previous result.

    A stage may use only the measurements it can determine: stage parameters
    that do not affect single-device runs (alpha, beta) use every point, while
    a lone ``eta`` stage uses the smallest-device points when they suffice.
    """
    results = []
    for stage in stages:
        pts = list(measurements)
        if list(stage) == ["eta"]:
            smallest = min(m.p for m in pts)
            pts = [m for m in pts if m.p == smallest]
        res = fit(pts, job, system, stage, bounds)
        results.append(res)
        job = res.job
    return results
