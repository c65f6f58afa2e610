"""Worst-case response times and utilization-based sizing.

The per-stage bound is the classic fixed-priority preemptive recurrence
with a blocking term,

    R = B + C + sum_z ceil(R / T_z) * C_z

iterated from R0 = B + C over the same-core cotenants z with higher (or
equal - mutual interference) priority. A one-shot cotenant contributes
its cost exactly once. All arithmetic is exact: integer nanoseconds for
times, Fraction for utilizations.

End-to-end response times compose per the topology: sequential stages
add, parallel branches take the maximum.

The sizing side is the linear-time utilization bound: a system whose
total utilization U satisfies U < (m - 1/2) * U_max fits on m cores of
capacity U_max, valid in the regime T + B = D with deadline-monotonic
priorities. The inequality is strict, which matters at exact boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union

from .model import (
    INFINITE,
    Cluster,
    Duration,
    Expr,
    Leaf,
    Marker,
    Par,
    Seq,
    Stage,
    System,
)

#: Returned when the response-time iteration climbs past its cap.
DIVERGED = Marker("DIVERGED")

ResponseTime = Union[int, Marker]


class InvalidAllocation(Exception):
    """A stage has no host core (or an unknown one)."""


class MissingStage(Exception):
    """A topology leaf has no response-time entry."""


class PreconditionViolated(Exception):
    """The utilization bound's validity regime does not hold."""

    def __init__(self, stage_id: str, message: str):
        super().__init__(f"stage {stage_id!r}: {message}")
        self.stage_id = stage_id


class AnalyticVerdict(NamedTuple):
    end_to_end: ResponseTime
    feasible: bool


@dataclass
class ResponseReport:
    """Per-stage worst-case response times plus per-analytic verdicts."""

    per_stage: dict[str, ResponseTime]
    per_analytic: dict[str, AnalyticVerdict]
    system_feasible: bool


@dataclass
class UtilizationSummary:
    total: Fraction
    per_stage: dict[str, Fraction]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def stage_response_time(stage: Stage, cotenants: Iterable[Stage],
                        deadline_cap: Duration, *,
                        blocking: Duration | None = None) -> ResponseTime:
    """Least fixed point of the response-time recurrence, or DIVERGED as
    soon as an iterate exceeds ``deadline_cap``.

    ``cotenants`` must already be restricted to the interfering set
    (higher priority plus equal priority on the same core); every entry
    is charged. ``blocking`` overrides the stage's own blocking term
    (callers fold in platform blocking that way).
    """
    b = stage.blocking if blocking is None else blocking
    base = b + stage.cost
    cotenants = list(cotenants)
    r = base
    while True:
        if r > deadline_cap:
            return DIVERGED
        nxt = base
        for z in cotenants:
            if z.inter_arrival is INFINITE:
                nxt += z.cost
            else:
                nxt += _ceil_div(r, z.inter_arrival) * z.cost
        if nxt == r:
            return r
        r = nxt


def end_to_end_response(expr: Expr,
                        per_stage: Mapping[str, Duration]) -> Duration:
    """Compose per-stage response times over the topology: Seq sums,
    Par takes the maximum."""
    if isinstance(expr, Leaf):
        try:
            return per_stage[expr.stage]
        except KeyError:
            raise MissingStage(expr.stage) from None
    if isinstance(expr, Seq):
        return sum(end_to_end_response(c, per_stage) for c in expr.children)
    if isinstance(expr, Par):
        return max(end_to_end_response(c, per_stage) for c in expr.children)
    raise TypeError(f"not a composition expression: {expr!r}")


def solve_system(system: System, allocation: Mapping[str, str],
                 cluster: Cluster) -> ResponseReport:
    """Bound every stage against its same-core higher/equal-priority
    cotenants and compose the analytic verdicts.

    The effective blocking of a stage is max(stage blocking, platform
    blocking of its host core). The iteration cap is the largest
    end-to-end deadline in the system, so a stage that converges above
    its own analytic's deadline is still reported (and judged
    infeasible) rather than clipped to DIVERGED.
    """
    stages = list(system.stages())
    for s in stages:
        if s.id not in allocation:
            raise InvalidAllocation(f"stage {s.id!r} has no core")
        if s.priority is None:
            raise ValueError(f"stage {s.id!r} has no priority")
    core_ids = {c.id for c in cluster.cores}
    for sid, cid in allocation.items():
        if cid not in core_ids:
            raise InvalidAllocation(f"stage {sid!r} mapped to unknown core {cid!r}")

    cap = max((a.end_to_end_deadline for a in system.analytics), default=0)

    by_core: dict[str, list[Stage]] = {}
    for s in stages:
        by_core.setdefault(allocation[s.id], []).append(s)

    per_stage: dict[str, ResponseTime] = {}
    for s in stages:
        mates = by_core[allocation[s.id]]
        interferers = [z for z in mates
                       if z.id != s.id and z.priority >= s.priority]
        b_eff = max(s.blocking,
                    cluster.core(allocation[s.id]).platform_blocking)
        per_stage[s.id] = stage_response_time(
            s, interferers, cap, blocking=b_eff)

    per_analytic: dict[str, AnalyticVerdict] = {}
    for analytic in system.analytics:
        if any(per_stage[s.id] is DIVERGED for s in analytic.stages):
            per_analytic[analytic.id] = AnalyticVerdict(DIVERGED, False)
            continue
        e2e = end_to_end_response(analytic.topology, per_stage)
        per_analytic[analytic.id] = AnalyticVerdict(
            e2e, e2e <= analytic.end_to_end_deadline)

    return ResponseReport(
        per_stage=per_stage,
        per_analytic=per_analytic,
        system_feasible=all(v.feasible for v in per_analytic.values()),
    )


def total_utilization(system: System) -> UtilizationSummary:
    """Exact per-stage C/T (0 for one-shot stages) and their sum."""
    per_stage = {s.id: s.utilization() for s in system.stages()}
    return UtilizationSummary(
        total=sum(per_stage.values(), Fraction(0)),
        per_stage=per_stage,
    )


def min_cores(total_utilization, u_max) -> int:
    """Least m >= 1 with total_utilization < (m - 1/2) * u_max."""
    u = Fraction(total_utilization)
    umax = Fraction(u_max)
    if not 0 < umax <= 1:
        raise ValueError("u_max must be in (0, 1]")
    if u < 0:
        raise ValueError("utilization must be non-negative")
    q = u / umax + Fraction(1, 2)
    # least integer strictly greater than q
    return q.numerator // q.denominator + 1


def check_utilization_bound(system: System, m: int, u_max) -> bool:
    """True iff total utilization < (m - 1/2) * u_max.

    Only valid (and therefore only answered) when every finite-rate
    stage has T + B = D exactly and priorities are deadline-monotonic;
    anything else raises PreconditionViolated naming an offending stage.
    """
    require_bound_regime(system)
    if m < 1:
        raise ValueError("m must be positive")
    umax = Fraction(u_max)
    return total_utilization(system).total < (m - Fraction(1, 2)) * umax


def require_bound_regime(system: System) -> None:
    """Raise PreconditionViolated unless T + B = D for every finite-rate
    stage and assigned priorities are deadline-monotonic."""
    stages = list(system.stages())
    for s in stages:
        if s.inter_arrival is not INFINITE:
            if s.inter_arrival + s.blocking != s.deadline:
                raise PreconditionViolated(
                    s.id, "inter-arrival + blocking != deadline")
    for s in stages:
        if s.priority is None:
            raise PreconditionViolated(s.id, "priority unassigned")
    # group by deadline; shorter deadlines must dominate strictly
    by_deadline: dict[int, list[int]] = {}
    rep: dict[int, str] = {}
    for s in stages:
        by_deadline.setdefault(s.deadline, []).append(s.priority)
        rep.setdefault(s.deadline, s.id)
    prev_min: int | None = None
    prev_d: int | None = None
    for d in sorted(by_deadline):
        cur = by_deadline[d]
        if prev_min is not None and max(cur) >= prev_min:
            raise PreconditionViolated(
                rep[d],
                f"priorities not deadline-monotonic (deadline {d} vs {prev_d})")
        prev_min = min(cur)
        prev_d = d
