"""Capacity-planning sweeps: utilization and minimum cores versus input
frequency, decimation trade-offs, and the blocking-model comparison.

All rows are exact rationals; core counts come from the strict
utilization bound in :mod:`tcsizer.analysis`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

from .analysis import (
    end_to_end_response,
    min_cores,
    require_bound_regime,
    total_utilization,
)
from .model import (
    INFINITE,
    Analytic,
    Duration,
    Expr,
    Leaf,
    Par,
    Seq,
    Stage,
    System,
    replicate_for_rate,
)
from .workloads import period_from_frequency


@dataclass
class SweepRow:
    frequency_hz: Fraction
    total_utilization: Fraction
    min_cores: int
    per_stage_utilization: dict[str, Fraction]


@dataclass
class DecimationRow:
    factor: int
    end_to_end: Duration
    aggregator_utilization: Fraction
    cores_saved: int


class ComparisonResult(NamedTuple):
    ours: int
    baseline: int


def retime_system(template: System, frequency_hz, *,
                  replication_limit: int = 4096) -> System:
    """Re-time a template (costs and blockings are kept) for one input
    frequency: every stage gets T = floor(1s / f); stages with C > T are
    replicated round-robin; every resulting stage gets D = T + B."""
    t_in = period_from_frequency(frequency_hz)
    analytics = []
    for analytic in template.analytics:
        stage_map: dict[str, list[Stage]] = {}
        new_stages: list[Stage] = []
        for s in analytic.stages:
            retimed = replace(s, inter_arrival=t_in)
            replicas = [
                replace(r, deadline=r.inter_arrival + r.blocking)
                for r in replicate_for_rate(retimed, replication_limit)
            ]
            stage_map[s.id] = replicas
            new_stages.extend(replicas)
        topo = _expand_topology(analytic.topology, stage_map)
        analytics.append(replace(analytic, stages=tuple(new_stages),
                                 topology=topo))
    return System(tuple(analytics))


def _expand_topology(expr: Expr, stage_map: dict[str, list[Stage]]) -> Expr:
    if isinstance(expr, Leaf):
        replicas = stage_map[expr.stage]
        if len(replicas) == 1:
            return Leaf(replicas[0].id)
        return Par(tuple(Leaf(r.id) for r in replicas))
    if isinstance(expr, Seq):
        return Seq(tuple(_expand_topology(c, stage_map) for c in expr.children))
    return Par(tuple(_expand_topology(c, stage_map) for c in expr.children))


def frequency_sweep(template: System, frequencies: Sequence, u_max, *,
                    replication_limit: int = 4096) -> list[SweepRow]:
    """One row per input frequency.

    Per-stage utilizations are keyed by the template's stage ids; a
    replicated stage's replicas sum back to exactly C/T_in, so the total
    is replication-invariant.
    """
    rows = []
    for f in frequencies:
        freq = Fraction(f)
        # materialize for the side effects of the contract: replication
        # limits are enforced (ReplicationExceeded propagates)
        retime_system(template, freq, replication_limit=replication_limit)
        t_in = period_from_frequency(freq)
        per_stage = {
            s.id: Fraction(s.cost, t_in) if s.inter_arrival is not INFINITE
            else Fraction(0)
            for s in template.stages()
        }
        total = sum(per_stage.values(), Fraction(0))
        rows.append(SweepRow(
            frequency_hz=freq,
            total_utilization=total,
            min_cores=min_cores(total, u_max),
            per_stage_utilization=per_stage,
        ))
    return rows


def _unique_sink(analytic: Analytic) -> str:
    sinks = _sinks(analytic.topology)
    if len(sinks) != 1:
        raise ValueError(
            f"analytic {analytic.id!r}: decimation needs a unique final stage, "
            f"found {sinks}")
    return sinks[0]


def _sinks(expr: Expr) -> list[str]:
    if isinstance(expr, Leaf):
        return [expr.stage]
    if isinstance(expr, Seq):
        return _sinks(expr.children[-1])
    out: list[str] = []
    for c in expr.children:
        out.extend(_sinks(c))
    return out


def decimation_sweep(template: System, input_frequency, factors: Sequence[int],
                     u_max) -> list[DecimationRow]:
    """Trade aggregator rate against end-to-end latency.

    The final stage of the (single) analytic is the aggregator. Factor F
    makes it activate once per F inputs: its inter-arrival becomes
    F * T_in (utilization divided by F) and the oldest item of a batch
    waits (F-1) * T_in in the buffer, charged as extra blocking on the
    aggregator. F = 1 is exactly the undecimated analysis.

    Responses use the isolated-stage model (R = B + C, no interference):
    the sweep sizes each phase onto its own cores, so cross-stage
    interference is a deployment concern, not a sizing one.
    """
    if len(template.analytics) != 1:
        raise ValueError("decimation_sweep expects a single-analytic system")
    analytic = template.analytics[0]
    agg_id = _unique_sink(analytic)
    t_in = period_from_frequency(input_frequency)

    def row(factor: int) -> tuple[Duration, Fraction, int]:
        if factor < 1:
            raise ValueError("decimation factors must be >= 1")
        per_stage_resp: dict[str, Duration] = {}
        util = Fraction(0)
        agg_util = Fraction(0)
        for s in analytic.stages:
            if s.id == agg_id:
                t = factor * t_in
                resp = s.blocking + (factor - 1) * t_in + s.cost
                agg_util = Fraction(s.cost, t)
                util += agg_util
            else:
                resp = s.blocking + s.cost
                util += Fraction(s.cost, t_in)
            per_stage_resp[s.id] = resp
        e2e = end_to_end_response(analytic.topology, per_stage_resp)
        return e2e, agg_util, min_cores(util, u_max)

    _, _, cores_undecimated = row(1)
    rows = []
    for factor in factors:
        e2e, agg_util, cores = row(factor)
        rows.append(DecimationRow(
            factor=factor,
            end_to_end=e2e,
            aggregator_utilization=agg_util,
            cores_saved=cores_undecimated - cores,
        ))
    return rows


def baseline_comparison(system: System, u_max) -> ComparisonResult:
    """Core counts under our blocking model versus a baseline that has no
    blocking term and must charge B as execution demand.

    Ours sizes with C/T (blocking only widens deadlines, T + B = D);
    the baseline sizes with (C + B)/T. baseline >= ours always, equal
    when every B is zero.
    """
    require_bound_regime(system)
    ours_u = Fraction(0)
    base_u = Fraction(0)
    for s in system.stages():
        if s.inter_arrival is INFINITE:
            continue
        ours_u += Fraction(s.cost, s.inter_arrival)
        base_u += Fraction(s.cost + s.blocking, s.inter_arrival)
    return ComparisonResult(
        ours=min_cores(ours_u, u_max),
        baseline=min_cores(base_u, u_max),
    )
