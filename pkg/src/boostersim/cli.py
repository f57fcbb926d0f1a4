"""Command line front end: ``boostersim <subcommand> [options]``.

Exit status is 0 on success, 2 for invalid input or configuration and 1 for
model errors.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from boostersim import output
from boostersim.calibration import Measurement, fit_stages
from boostersim.collectives import (
    ALGORITHMS,
    HIERARCHICAL,
    CollectiveParams,
    allreduce_time,
    make_placement,
)
from boostersim.config import Config, load_config, load_topology
from boostersim.errors import BoosterSimError, ConfigError
from boostersim.hardware import Precision, energy_efficiency, system_peak
from boostersim.reproduce import CASES, run_cases
from boostersim.topology import build_dragonfly_plus, edge_list_csv, route, summarize, to_dot
from boostersim.workload import epoch_time, step_breakdown, sweep, time_to_train

log = logging.getLogger("boostersim")

_SIZE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([KMGT]i?B|B)?\s*$", re.IGNORECASE)
_UNITS = {
    "b": 1, "kb": 1e3, "mb": 1e6, "gb": 1e9, "tb": 1e12,
    "kib": 2**10, "mib": 2**20, "gib": 2**30, "tib": 2**40,
}


def parse_size(text: str) -> float:
    """``"1.5MB"`` -> 1.5e6 bytes; decimal prefixes, ``KiB`` style for binary."""
    m = _SIZE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad message size {text!r} (e.g. 512KB, 1GB, 4096)")
    return float(m.group(1)) * _UNITS[(m.group(2) or "B").lower()]


class Context:
    def __init__(self, args):
        self.args = args
        self._config: Config | None = None

    @property
    def config(self) -> Config:
        if self._config is None:
            self._config = load_config(self.args.config)
        return self._config

    @property
    def fmt(self) -> str:
        return self.args.format or self.config.output.format

    def emit(self, text: str) -> None:
        if self.args.out:
            Path(self.args.out).write_text(text, newline="\n")
        else:
            sys.stdout.write(text)

    def human(self, text: str) -> None:
        if not self.args.quiet and self.fmt != "text":
            sys.stderr.write(text)

    def table(self, header, rows) -> None:
        self.emit(output.render(self.fmt, header, rows))
        self.human(output.to_text(header, rows))


# -- subcommands --------------------------------------------------------------


def cmd_topo(ctx: Context) -> int:
    args = ctx.args
    spec = load_topology(args.topology) if args.topology else ctx.config.system_spec().topology
    graph = build_dragonfly_plus(spec)
    if args.action == "edges":
        ctx.emit(edge_list_csv(graph))
    elif args.action == "dot":
        ctx.emit(to_dot(graph))
    elif args.action == "route":
        path = route(graph, args.src, args.dst)
        header = ["hop", "src_id", "dst_id", "kind", "bandwidth_bits_per_s", "latency_s"]
        rows = [
            [i, path.vertices[i], path.vertices[i + 1], e.kind, e.bandwidth, e.latency]
            for i, e in enumerate(path.edges)
        ]
        ctx.table(header, rows)
        ctx.human(
            f"{path.hops} hops, bottleneck {path.bottleneck_bandwidth / 1e9:g} Gbit/s, "
            f"latency {path.latency * 1e6:.3f} us\n"
        )
    else:
        s = summarize(graph)
        header = ["cells", "compute_nodes", "leaf_switches", "spine_switches", "edges",
                  "inter_cell_edges", "bisection_bits_per_s"]
        ctx.table(header, [[s.cells, s.compute_nodes, s.leaf_switches, s.spine_switches, s.edges,
                            s.inter_cell_edges, s.bisection_bits_per_s]])
    return 0


def cmd_hw(ctx: Context) -> int:
    system = ctx.config.system_spec()
    gpu = system.gpu
    header = ["precision", "bytes_per_element", "gpu_peak_flops", "system_peak_flops", "peak_flops_per_watt"]
    rows = [
        [p.value, p.bytes_per_element, gpu.peak_flops[p], system_peak(system, p),
         energy_efficiency(gpu.peak_flops[p], gpu.tdp)]
        for p in Precision if p in gpu.peak_flops
    ]
    ctx.table(header, rows)
    ctx.human(
        f"{system.name}: {system.num_nodes} nodes x {system.node.gpus_per_node} {gpu.name} "
        f"({system.total_devices} GPUs, {gpu.tdp:g} W TDP each)\n"
    )
    return 0


def cmd_collective(ctx: Context) -> int:
    args = ctx.args
    system = ctx.config.system_spec()
    beta = args.beta if args.beta is not None else 8 / system.topology.nic_bandwidth
    header = ["algorithm", "p", "message_bytes", "alpha_s", "beta_s_per_byte", "compression", "time_s"]
    rows = []
    for p in args.participants:
        placement = None
        if args.algorithm == HIERARCHICAL:
            placement = make_placement(p, system.node.gpus_per_node, system.topology)
        for size in args.size:
            params = CollectiveParams(args.algorithm, p, size, args.alpha, beta, args.compression)
            t = allreduce_time(params, system.node, placement)
            rows.append([args.algorithm, p, size, args.alpha, beta, args.compression, t])
    ctx.table(header, rows)
    return 0


def cmd_train(ctx: Context) -> int:
    cfg = ctx.config
    system = cfg.system_spec()
    job = cfg.job(ctx.args.workload, ctx.args.devices)
    b = step_breakdown(job, system)
    t_epoch = epoch_time(job, system)
    ttt = time_to_train(job, system)
    header = ["workload", "p", "compute_s", "comm_s", "exposed_comm_s", "io_s", "step_time_s",
              "steps_per_epoch", "epoch_time_s", "epochs", "time_to_train_s"]
    ctx.table(header, [[job.name, job.devices, b.compute, b.comm, b.exposed_comm, b.io, b.total,
                        job.steps_per_epoch, t_epoch, job.epochs, ttt]])
    ctx.human(f"time to train: {ttt / 3600:.2f} h\n")
    return 0


SWEEP_HEADER = ["p", "step_time_s", "epoch_time_s", "samples_per_s", "efficiency", "ideal_epoch_time_s"]


def cmd_sweep(ctx: Context) -> int:
    cfg = ctx.config
    name = ctx.args.workload
    counts = ctx.args.devices
    if counts is None:
        counts = cfg.workloads[name].devices if name in cfg.workloads else []
    if not counts:
        raise ConfigError("sweep needs at least one device count",
                          [f"pass --devices or set workloads.{name}.devices"])
    bad = [p for p in counts if p < 1]
    if bad:
        raise ConfigError("device counts must be >= 1", [f"--devices: {bad}"])
    report = sweep(cfg.job(name, min(counts)), counts, cfg.system_spec())
    rows = [[r.p, r.step_time, r.epoch_time, r.samples_per_second, r.efficiency, r.ideal_epoch_time]
            for r in report.rows]
    ctx.table(SWEEP_HEADER, rows)
    return 0


def _read_measurements_csv(path: str, kind: str) -> list[Measurement]:
    import csv

    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"p", "time_s"} - set(reader.fieldnames or [])
            if missing:
                raise ConfigError(f"{path}: missing columns {sorted(missing)}")
            out = []
            for line, row in enumerate(reader, start=2):
                try:
                    spread = row.get("spread_s") or None
                    out.append(Measurement(int(row["p"]), float(row["time_s"]), kind,
                                           float(spread) if spread else None))
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{path} line {line}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}", [str(exc)]) from None
    return out


def cmd_calibrate(ctx: Context) -> int:
    args = ctx.args
    cfg = ctx.config
    if args.measurements:
        if args.measurements not in cfg.measurements:
            raise ConfigError(f"unknown measurement set {args.measurements!r}",
                              [f"known: {', '.join(sorted(cfg.measurements))}"])
        mset = cfg.measurements[args.measurements]
        workload = args.workload or mset.workload
        points = cfg.measurement_points(args.measurements)
        stages = mset.fit
        bounds = dict(mset.bounds)
    else:
        if not (args.csv and args.workload):
            raise ConfigError("calibrate needs --measurements NAME, or --csv PATH with --workload NAME")
        workload = args.workload
        points = _read_measurements_csv(args.csv, args.kind)
        stages = [["eta"], ["alpha", "beta"]]
        bounds = {}
    if args.free:
        stages = [[p.strip() for p in s.split(",") if p.strip()] for s in args.free]
    if not points:
        raise ConfigError("no measurement points to fit")

    fits = fit_stages(points, cfg.job(workload), cfg.system_spec(), stages, bounds)
    fields = {"alpha": "alpha", "beta": "beta", "eta": "compute_efficiency", "overlap": "overlap"}
    fitted: dict[str, float] = {}
    for f in fits:
        for k, v in f.values.items():
            fitted[fields[k]] = v
    final = fits[-1]
    header = ["p", "observed_s", "predicted_s", "relative_error", "spread_s"]
    rows = [[pt.p, pt.observed, pt.predicted, pt.relative_error, pt.spread_s] for pt in final.points]
    # the config fragment is the point of this command; tables only on request
    fmt = args.format or "json"
    if fmt == "json":
        ctx.emit(output.dump_json({"workloads": {workload: fitted}}))
    else:
        ctx.emit(output.render(fmt, header, rows))
    if not args.quiet:
        for n, f in enumerate(fits, 1):
            vals = ", ".join(f"{k}={v:.6g}" for k, v in f.values.items())
            sys.stderr.write(f"stage {n}: {vals}  rms relative error {f.residual:.3e}\n")
        if fmt == "json":
            sys.stderr.write(output.to_text(header, rows))
    return 0


def cmd_reproduce(ctx: Context) -> int:
    args = ctx.args
    if not args.all and not args.case:
        raise ConfigError("reproduce needs --case NAME or --all", [f"cases: {', '.join(CASES)}"])
    names = list(CASES) if args.all else list(dict.fromkeys(args.case))
    results = run_cases(ctx.config, names)
    if ctx.fmt == "json":
        ctx.emit(output.dump_json([
            {"case": r.name, "passed": r.passed, "seconds": round(r.seconds, 3), "lines": r.lines}
            for r in results
        ]))
    else:
        text = []
        for r in results:
            text.append(f"== {r.name}")
            text.extend(r.lines)
            text.append(f"{r.verdict} {r.name}")
        failed = [r.name for r in results if not r.passed]
        text.append(f"{len(results) - len(failed)}/{len(results)} cases passed")
        ctx.emit("\n".join(text) + "\n")
    return 0 if all(r.passed for r in results) else 1


# -- argument parsing ---------------------------------------------------------


def _compression(text: str) -> float:
    """A ratio in (0, 1] or a precision pair such as ``FP32:FP16``."""
    if ":" in text:
        src, dst = (Precision.parse(t) for t in text.split(":", 1))
        return dst.bytes_per_element / src.bytes_per_element
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", metavar="PATH",
                        help="JSON config layered over the built-in defaults (repeatable); "
                             "falls back to $BOOSTERSIM_CONFIG")
    common.add_argument("--out", metavar="PATH", help="write machine-readable output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json", "text"), help="output format (default from config)")
    common.add_argument("--quiet", action="store_true", help="suppress human-readable tables on stderr")

    parser = argparse.ArgumentParser(prog="boostersim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topo", parents=[common], help="build and inspect the DragonFly+ network")
    p.add_argument("action", nargs="?", default="summary", choices=("summary", "edges", "dot", "route"))
    p.add_argument("src", nargs="?", type=int)
    p.add_argument("dst", nargs="?", type=int)
    p.add_argument("--topology", metavar="PATH", help="stand-alone topology JSON document")
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("hw", parents=[common], help="hardware capability table")
    p.add_argument("action", nargs="?", default="show", choices=("show",))
    p.set_defaults(func=cmd_hw)

    p = sub.add_parser("collective", parents=[common], help="allreduce time for parameter points")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="ring")
    p.add_argument("-p", "--participants", type=int, nargs="+", required=True)
    p.add_argument("--size", type=parse_size, nargs="+", required=True, help="message size, e.g. 100MB")
    p.add_argument("--alpha", type=float, default=5e-6, help="seconds per step")
    p.add_argument("--beta", type=float, help="seconds per byte (default: one NIC)")
    p.add_argument("--compression", type=_compression, default=1.0,
                   help="wire size ratio in (0,1] or FROM:TO precisions")
    p.set_defaults(func=cmd_collective)

    p = sub.add_parser("train", parents=[common], help="step, epoch and time-to-train for one workload")
    p.add_argument("--workload", required=True)
    p.add_argument("--devices", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="scaling report over device counts")
    p.add_argument("--workload", required=True)
    p.add_argument("--devices", type=int, nargs="*")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", parents=[common], help="fit alpha, beta, eta, overlap to measurements")
    p.add_argument("--measurements", metavar="NAME", help="measurement set from the config")
    p.add_argument("--csv", metavar="PATH", help="measurements CSV with columns p,time_s")
    p.add_argument("--workload")
    p.add_argument("--kind", choices=("epoch", "step"), default="epoch")
    p.add_argument("--free", action="append", metavar="P[,P...]",
                   help="fit stage, e.g. --free eta --free alpha,beta")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("reproduce", parents=[common], help="run the published-figure reproduction cases")
    p.add_argument("--case", action="append", choices=tuple(CASES))
    p.add_argument("--all", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "topo" and args.action == "route" and (args.src is None or args.dst is None):
            parser.error("topo route needs SRC and DST node ids")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    ctx = Context(args)
    try:
        return args.func(ctx)
    except ConfigError as exc:
        sys.stderr.write(f"boostersim: error: {exc}\n")
        return 2
    except BoosterSimError as exc:
        sys.stderr.write(f"boostersim: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
