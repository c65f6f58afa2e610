"""On-disk system specs and the command-line front end.

A system spec is a strict JSON document:

    {
      "analytics": [
        {"id": "...", "end_to_end_deadline": "1s",
         "stages": [{"id": "...", "cost": "127us", "inter_arrival": "1ms",
                     "deadline": "1s", "blocking": "0ns"}],
         "topology": {"seq": ["a", {"par": ["b", "c"]}, "d"]}}
      ],
      "cluster": {"cores": [{"id": "c0", "capacity": 1.0,
                             "platform_blocking": "0ns"}]},
      "allocation": {"stage-id": "core-id"},          # optional
      "priorities": {"stage-id": 5},                  # optional
      "options": {"u_max": 1.0, "frequencies_hz": [1, 4000],
                  "factors": [1, 10], "input_frequency_hz": 1000,
                  "sim": {"horizon": "1s", "seed": 0,
                          "blocking_policy": "ADVERSARIAL",
                          "release_policy": "SYNCHRONOUS"}}   # optional
    }

Durations are strings with a unit suffix (ns, us, ms, s, min, h) parsed
exactly to integer nanoseconds; "inf" is allowed for inter-arrival times
only. Unknown keys are rejected. Topology nodes are either a stage id
(leaf) or a one-key object {"seq": [...]} / {"par": [...]}.

Subcommands: analyze, size, decimate, simulate, compare. Exit codes:
0 = analysis ran and the system is feasible, 2 = analysis ran and it is
not, 1 = input or usage error. The environment variable TC_SIZER_SEED
overrides the default --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from . import analysis, model, sim, sizing
from .model import (
    INFINITE,
    Analytic,
    Cluster,
    Core,
    Expr,
    Leaf,
    Par,
    Seq,
    Stage,
    System,
)


class ParseError(Exception):
    """Spec parse failure with a JSON-pointer path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path
        self.message = message


_UNITS = {
    "ns": 1,
    "us": model.US,
    "µs": model.US,
    "ms": model.MS,
    "s": model.SEC,
    "min": model.MINUTE,
    "h": model.HOUR,
}

_DURATION_RE = re.compile(r"([0-9]+(?:\.[0-9]+)?)(ns|us|µs|ms|s|min|h)")


def parse_duration(text: str, *, allow_inf: bool = False, path: str = ""):
    """'1.5ms' -> 1_500_000; exact or ParseError."""
    if not isinstance(text, str):
        raise ParseError(path, f"expected a duration string, got {text!r}")
    if text == "inf":
        if allow_inf:
            return INFINITE
        raise ParseError(path, '"inf" is only allowed for inter-arrival times')
    m = _DURATION_RE.fullmatch(text.strip())
    if not m:
        raise ParseError(path, f"cannot parse duration {text!r}")
    value = Fraction(m.group(1)) * _UNITS[m.group(2)]
    if value.denominator != 1:
        raise ParseError(
            path, f"duration {text!r} is not a whole number of nanoseconds")
    return int(value)


def format_duration(ns) -> str:
    if ns is INFINITE:
        return "inf"
    return f"{ns}ns"


def format_fraction(x: Fraction) -> str:
    """Up to 9 significant digits, integers without a decimal point."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.9g}"


def _json_number(x: Fraction):
    """Lossless JSON value for a rational: int, float when the decimal
    repr round-trips exactly, else a "num/den" string."""
    if x.denominator == 1:
        return x.numerator
    as_float = float(x)
    if Fraction(repr(as_float)) == x:
        return as_float
    return f"{x.numerator}/{x.denominator}"


# --- strict JSON walking ------------------------------------------------------

def _expect(obj, typ, path, what):
    if not isinstance(obj, typ) or isinstance(obj, bool) and typ is not bool:
        raise ParseError(path, f"expected {what}")
    return obj


def _expect_keys(obj: dict, path: str, required: tuple[str, ...],
                 optional: tuple[str, ...] = ()) -> None:
    for key in required:
        if key not in obj:
            raise ParseError(f"{path}/{key}", "missing required key")
    for key in obj:
        if key not in required and key not in optional:
            raise ParseError(f"{path}/{key}", "unknown key")


def _parse_topology(node: Any, path: str) -> Expr:
    if isinstance(node, str):
        return Leaf(node)
    if isinstance(node, dict):
        if len(node) != 1:
            raise ParseError(path, 'topology node must be a stage id or '
                             'a one-key {"seq"|"par": [...]} object')
        key, children = next(iter(node.items()))
        if key not in ("seq", "par"):
            raise ParseError(f"{path}/{key}", "unknown composition kind")
        _expect(children, list, f"{path}/{key}", "a list")
        if not children:
            raise ParseError(f"{path}/{key}", "empty composition")
        parsed = tuple(
            _parse_topology(c, f"{path}/{key}/{i}")
            for i, c in enumerate(children))
        return Seq(parsed) if key == "seq" else Par(parsed)
    raise ParseError(path, f"bad topology node {node!r}")


def _emit_topology(expr: Expr):
    if isinstance(expr, Leaf):
        return expr.stage
    if isinstance(expr, Seq):
        return {"seq": [_emit_topology(c) for c in expr.children]}
    return {"par": [_emit_topology(c) for c in expr.children]}


def _parse_stage(obj: Any, path: str) -> Stage:
    _expect(obj, dict, path, "a stage object")
    _expect_keys(obj, path, ("id", "cost", "inter_arrival", "deadline"),
                 ("blocking",))
    sid = _expect(obj["id"], str, f"{path}/id", "a string")
    return Stage(
        id=sid,
        cost=parse_duration(obj["cost"], path=f"{path}/cost"),
        inter_arrival=parse_duration(obj["inter_arrival"], allow_inf=True,
                                     path=f"{path}/inter_arrival"),
        deadline=parse_duration(obj["deadline"], path=f"{path}/deadline"),
        blocking=parse_duration(obj.get("blocking", "0ns"),
                                path=f"{path}/blocking"),
    )


def _parse_analytic(obj: Any, path: str) -> Analytic:
    _expect(obj, dict, path, "an analytic object")
    _expect_keys(obj, path,
                 ("id", "stages", "topology", "end_to_end_deadline"))
    stages = _expect(obj["stages"], list, f"{path}/stages", "a list")
    return Analytic(
        id=_expect(obj["id"], str, f"{path}/id", "a string"),
        stages=tuple(_parse_stage(s, f"{path}/stages/{i}")
                     for i, s in enumerate(stages)),
        topology=_parse_topology(obj["topology"], f"{path}/topology"),
        end_to_end_deadline=parse_duration(
            obj["end_to_end_deadline"], path=f"{path}/end_to_end_deadline"),
    )


def _parse_ratio(value: Any, path: str, what: str) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(path, f"{what} must be a number")
    try:
        if isinstance(value, (int, Fraction)):
            return Fraction(value)
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError):
        pass
    raise ParseError(path, f"{what} must be a number or a \"num/den\" string")


def _parse_capacity(value: Any, path: str) -> Fraction:
    cap = _parse_ratio(value, path, "capacity")
    if not 0 < cap <= 1:
        raise ParseError(path, "capacity must be in (0, 1]")
    return cap


def _parse_cluster(obj: Any, path: str) -> Cluster:
    _expect(obj, dict, path, "a cluster object")
    _expect_keys(obj, path, ("cores",))
    cores_obj = _expect(obj["cores"], list, f"{path}/cores", "a list")
    if not cores_obj:
        raise ParseError(f"{path}/cores", "cluster must have at least one core")
    cores = []
    for i, c in enumerate(cores_obj):
        cpath = f"{path}/cores/{i}"
        _expect(c, dict, cpath, "a core object")
        _expect_keys(c, cpath, ("id",), ("capacity", "platform_blocking"))
        cores.append(Core(
            id=_expect(c["id"], str, f"{cpath}/id", "a string"),
            capacity=_parse_capacity(c.get("capacity", 1), f"{cpath}/capacity"),
            platform_blocking=parse_duration(
                c.get("platform_blocking", "0ns"),
                path=f"{cpath}/platform_blocking"),
        ))
    try:
        return Cluster(tuple(cores))
    except ValueError as exc:
        raise ParseError(f"{path}/cores", str(exc)) from None


@dataclass
class Options:
    u_max: Fraction = Fraction(1)
    frequencies_hz: list[Fraction] | None = None
    factors: list[int] | None = None
    input_frequency_hz: Fraction | None = None
    horizon: int | None = None
    seed: int | None = None
    blocking_policy: sim.BlockingPolicy = sim.BlockingPolicy.ADVERSARIAL
    release_policy: sim.ReleasePolicy = sim.ReleasePolicy.SYNCHRONOUS


def _parse_frequency(value: Any, path: str) -> Fraction:
    f = _parse_ratio(value, path, "frequency")
    if f <= 0:
        raise ParseError(path, "frequency must be positive")
    return f


def _parse_options(obj: Any, path: str) -> Options:
    _expect(obj, dict, path, "an options object")
    _expect_keys(obj, path, (),
                 ("u_max", "frequencies_hz", "factors", "input_frequency_hz",
                  "sim"))
    opts = Options()
    if "u_max" in obj:
        opts.u_max = _parse_capacity(obj["u_max"], f"{path}/u_max")
    if "frequencies_hz" in obj:
        freqs = _expect(obj["frequencies_hz"], list,
                        f"{path}/frequencies_hz", "a list")
        opts.frequencies_hz = [
            _parse_frequency(f, f"{path}/frequencies_hz/{i}")
            for i, f in enumerate(freqs)]
    if "factors" in obj:
        factors = _expect(obj["factors"], list, f"{path}/factors", "a list")
        for i, k in enumerate(factors):
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise ParseError(f"{path}/factors/{i}",
                                 "factors must be positive integers")
        opts.factors = list(factors)
    if "input_frequency_hz" in obj:
        opts.input_frequency_hz = _parse_frequency(
            obj["input_frequency_hz"], f"{path}/input_frequency_hz")
    if "sim" in obj:
        sobj = _expect(obj["sim"], dict, f"{path}/sim", "an object")
        _expect_keys(sobj, f"{path}/sim", (),
                     ("horizon", "seed", "blocking_policy", "release_policy"))
        if "horizon" in sobj:
            opts.horizon = parse_duration(sobj["horizon"],
                                          path=f"{path}/sim/horizon")
        if "seed" in sobj:
            seed = sobj["seed"]
            if isinstance(seed, bool) or not isinstance(seed, int):
                raise ParseError(f"{path}/sim/seed", "seed must be an integer")
            opts.seed = seed
        if "blocking_policy" in sobj:
            try:
                opts.blocking_policy = sim.BlockingPolicy(
                    sobj["blocking_policy"])
            except ValueError:
                raise ParseError(f"{path}/sim/blocking_policy",
                                 f"unknown policy {sobj['blocking_policy']!r}")
        if "release_policy" in sobj:
            try:
                opts.release_policy = sim.ReleasePolicy(sobj["release_policy"])
            except ValueError:
                raise ParseError(f"{path}/sim/release_policy",
                                 f"unknown policy {sobj['release_policy']!r}")
    return opts


def parse_system_spec(text: str) -> tuple[System, Cluster, Options]:
    """Parse a spec document; priorities/allocation maps are applied onto
    the stages. Raises ParseError with a JSON-pointer path."""
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ParseError("", f"invalid JSON: {exc}") from None
    _expect(doc, dict, "", "a JSON object")
    _expect_keys(doc, "", ("analytics", "cluster"),
                 ("allocation", "priorities", "options"))

    analytics_obj = _expect(doc["analytics"], list, "/analytics", "a list")
    system = System(tuple(
        _parse_analytic(a, f"/analytics/{i}")
        for i, a in enumerate(analytics_obj)))
    cluster = _parse_cluster(doc["cluster"], "/cluster")

    stage_ids = {s.id for s in system.stages()}
    if "priorities" in doc:
        prios = _expect(doc["priorities"], dict, "/priorities", "an object")
        for sid, p in prios.items():
            if sid not in stage_ids:
                raise ParseError(f"/priorities/{sid}", "unknown stage")
            if isinstance(p, bool) or not isinstance(p, int):
                raise ParseError(f"/priorities/{sid}",
                                 "priority must be an integer")
        system = model.with_priorities(system, prios)
    if "allocation" in doc:
        alloc = _expect(doc["allocation"], dict, "/allocation", "an object")
        core_ids = {c.id for c in cluster.cores}
        for sid, cid in alloc.items():
            if sid not in stage_ids:
                raise ParseError(f"/allocation/{sid}", "unknown stage")
            if cid not in core_ids:
                raise ParseError(f"/allocation/{sid}",
                                 f"unknown core {cid!r}")
        system = model.with_allocation(system, alloc)

    options = (_parse_options(doc["options"], "/options")
               if "options" in doc else Options())
    return system, cluster, options


def emit_system_spec(system: System, cluster: Cluster,
                     options: Options | None = None) -> str:
    """Inverse of parse_system_spec: parse(emit(x)) == x."""
    doc: dict[str, Any] = {
        "analytics": [
            {
                "id": a.id,
                "end_to_end_deadline": format_duration(a.end_to_end_deadline),
                "stages": [
                    {
                        "id": s.id,
                        "cost": format_duration(s.cost),
                        "inter_arrival": format_duration(s.inter_arrival),
                        "deadline": format_duration(s.deadline),
                        "blocking": format_duration(s.blocking),
                    }
                    for s in a.stages
                ],
                "topology": _emit_topology(a.topology),
            }
            for a in system.analytics
        ],
        "cluster": {
            "cores": [
                {
                    "id": c.id,
                    "capacity": _json_number(c.capacity),
                    "platform_blocking": format_duration(c.platform_blocking),
                }
                for c in cluster.cores
            ]
        },
    }
    priorities = {s.id: s.priority for s in system.stages()
                  if s.priority is not None}
    if priorities:
        doc["priorities"] = priorities
    allocation = {s.id: s.core for s in system.stages() if s.core is not None}
    if allocation:
        doc["allocation"] = allocation
    if options is not None:
        opt: dict[str, Any] = {"u_max": _json_number(options.u_max)}
        if options.frequencies_hz is not None:
            opt["frequencies_hz"] = [_json_number(f)
                                     for f in options.frequencies_hz]
        if options.factors is not None:
            opt["factors"] = options.factors
        if options.input_frequency_hz is not None:
            opt["input_frequency_hz"] = _json_number(
                options.input_frequency_hz)
        sim_opt: dict[str, Any] = {}
        if options.horizon is not None:
            sim_opt["horizon"] = format_duration(options.horizon)
        if options.seed is not None:
            sim_opt["seed"] = options.seed
        sim_opt["blocking_policy"] = options.blocking_policy.value
        sim_opt["release_policy"] = options.release_policy.value
        opt["sim"] = sim_opt
        doc["options"] = opt
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- command front end --------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tcsizer", add_help=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="response-time analysis and verdicts")
    p.add_argument("spec")

    p = sub.add_parser("size", help="utilization/min-cores frequency sweep")
    p.add_argument("spec")
    p.add_argument("--freqs", default=None,
                   help="comma-separated frequencies in Hz")
    p.add_argument("--umax", default=None, help="per-core capacity bound")
    p.add_argument("--replication-limit", type=int, default=4096)

    p = sub.add_parser("decimate", help="decimation trade-off sweep")
    p.add_argument("spec")
    p.add_argument("--factors", default=None,
                   help="comma-separated decimation factors")
    p.add_argument("--freq", default=None, help="input frequency in Hz")
    p.add_argument("--umax", default=None)

    p = sub.add_parser("simulate", help="discrete-event simulation")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", default=None, help="duration, e.g. 2s")
    p.add_argument("--trace", default="trace.csv", help="trace CSV path")
    p.add_argument("--blocking", choices=[b.value for b in sim.BlockingPolicy],
                   default=None)
    p.add_argument("--release", choices=[r.value for r in sim.ReleasePolicy],
                   default=None)

    p = sub.add_parser("compare", help="blocking-model core-count comparison")
    p.add_argument("spec")
    p.add_argument("--umax", default=None)
    return parser


def _load_spec(path: str) -> tuple[System, Cluster, Options]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror}") from None
    system, cluster, options = parse_system_spec(text)
    report = model.validate_system(system)
    if not report.ok:
        findings = "; ".join(f"{p}: {m}" for p, m in report.findings)
        raise _UsageError(f"invalid system: {findings}")
    return system, cluster, options


def _prepare(system: System, cluster: Cluster) -> tuple[System, dict[str, str]]:
    """Fill in priorities (deadline-monotonic) and allocation (first-fit)
    when the spec file leaves them out entirely; partial assignments are
    input errors."""
    prio_set = [s.priority is not None for s in system.stages()]
    if not any(prio_set):
        system = model.with_priorities(system, model.assign_priorities_dm(system))
    elif not all(prio_set):
        raise _UsageError("priorities must be given for all stages or none")
    core_set = [s.core is not None for s in system.stages()]
    if not any(core_set):
        try:
            allocation = model.allocate_first_fit(system, cluster)
        except model.AllocationFailed as exc:
            raise _UsageError(str(exc)) from None
        system = model.with_allocation(system, allocation)
    elif not all(core_set):
        raise _UsageError("allocation must cover all stages or none")
    return system, {s.id: s.core for s in system.stages()}


def _report_json(report: analysis.ResponseReport) -> str:
    def rt(value):
        return "DIVERGED" if value is analysis.DIVERGED else value

    doc = {
        "per_stage": {sid: rt(v) for sid, v in report.per_stage.items()},
        "per_analytic": {
            aid: {"end_to_end": rt(v.end_to_end), "feasible": v.feasible}
            for aid, v in report.per_analytic.items()
        },
        "system_feasible": report.system_feasible,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _parse_umax(arg: str | None, options: Options) -> Fraction:
    if arg is None:
        return options.u_max
    try:
        value = Fraction(arg)
    except (ValueError, ZeroDivisionError):
        raise _UsageError(f"bad --umax value {arg!r}") from None
    if not 0 < value <= 1:
        raise _UsageError("--umax must be in (0, 1]")
    return value


def _parse_freq_list(arg: str) -> list[Fraction]:
    out = []
    for tok in arg.split(","):
        try:
            f = Fraction(tok.strip())
        except (ValueError, ZeroDivisionError):
            raise _UsageError(f"bad frequency {tok!r}") from None
        if f <= 0:
            raise _UsageError(f"bad frequency {tok!r}")
        out.append(f)
    return out


def _cmd_analyze(args, out) -> int:
    system, cluster, _ = _load_spec(args.spec)
    system, allocation = _prepare(system, cluster)
    report = analysis.solve_system(system, allocation, cluster)
    out.write(_report_json(report))
    return 0 if report.system_feasible else 2


def _cmd_size(args, out) -> int:
    system, _cluster, options = _load_spec(args.spec)
    freqs = (_parse_freq_list(args.freqs) if args.freqs
             else options.frequencies_hz)
    if not freqs:
        raise _UsageError("no frequencies given")
    u_max = _parse_umax(args.umax, options)
    rows = sizing.frequency_sweep(system, freqs, u_max,
                                  replication_limit=args.replication_limit)
    out.write("frequency_hz,total_utilization,min_cores\n")
    for row in rows:
        out.write(f"{format_fraction(row.frequency_hz)},"
                  f"{format_fraction(row.total_utilization)},"
                  f"{row.min_cores}\n")
    return 0


def _cmd_decimate(args, out) -> int:
    system, _cluster, options = _load_spec(args.spec)
    if args.factors:
        try:
            factors = [int(tok) for tok in args.factors.split(",")]
        except ValueError:
            raise _UsageError("bad --factors list") from None
    else:
        factors = options.factors
    if not factors or any(f < 1 for f in factors):
        raise _UsageError("factors must be positive integers")
    if args.freq is not None:
        freq = _parse_freq_list(args.freq)[0]
    elif options.input_frequency_hz is not None:
        freq = options.input_frequency_hz
    else:
        raise _UsageError("no input frequency (--freq or options)")
    u_max = _parse_umax(args.umax, options)
    rows = sizing.decimation_sweep(system, freq, factors, u_max)
    out.write("factor,end_to_end_ns,aggregator_utilization,cores_saved\n")
    for row in rows:
        out.write(f"{row.factor},{row.end_to_end},"
                  f"{format_fraction(row.aggregator_utilization)},"
                  f"{row.cores_saved}\n")
    return 0


def _cmd_simulate(args, out) -> int:
    system, cluster, options = _load_spec(args.spec)
    system, allocation = _prepare(system, cluster)
    horizon = (parse_duration(args.horizon) if args.horizon
               else options.horizon)
    if horizon is None:
        raise _UsageError("no horizon (--horizon or options)")
    if args.seed is not None:
        seed = args.seed
    elif "TC_SIZER_SEED" in os.environ:
        try:
            seed = int(os.environ["TC_SIZER_SEED"])
        except ValueError:
            raise _UsageError("TC_SIZER_SEED must be an integer") from None
    elif options.seed is not None:
        seed = options.seed
    else:
        seed = 0
    config = sim.SimConfig(
        horizon=horizon,
        seed=seed,
        blocking_policy=(sim.BlockingPolicy(args.blocking) if args.blocking
                         else options.blocking_policy),
        release_policy=(sim.ReleasePolicy(args.release) if args.release
                        else options.release_policy),
    )
    report = analysis.solve_system(system, allocation, cluster)
    try:
        trace = sim.simulate(system, allocation, cluster, config)
    except sim.HorizonTooShort as exc:
        raise _UsageError(str(exc)) from None
    with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sim.trace_to_csv(trace))
    observed = sim.worst_observed(trace)
    violations = sim.verify_conservative(report, observed)
    doc = {
        "per_stage_observed": dict(sorted(observed.per_stage.items())),
        "per_analytic_observed": dict(sorted(observed.per_analytic.items())),
        "violations": [v._asdict() for v in violations],
        "conservative": not violations,
        "system_feasible": report.system_feasible,
    }
    out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0 if report.system_feasible else 2


def _cmd_compare(args, out) -> int:
    system, cluster, options = _load_spec(args.spec)
    if not any(s.priority is not None for s in system.stages()):
        system = model.with_priorities(system, model.assign_priorities_dm(system))
    u_max = _parse_umax(args.umax, options)
    result = sizing.baseline_comparison(system, u_max)
    doc = {"ours": result.ours, "baseline": result.baseline}
    out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "size": _cmd_size,
    "decimate": _cmd_decimate,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}


def run_command(argv, out=None, err=None) -> int:
    """Dispatch one command; returns the exit code (0 feasible,
    2 infeasible, 1 input/usage error)."""
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except _UsageError as exc:
        err.write(f"error: {exc}\n")
        return 1
    except (ParseError, analysis.PreconditionViolated,
            model.ReplicationExceeded, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
