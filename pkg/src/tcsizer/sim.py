"""Deterministic discrete-event simulation of partitioned fixed-priority
preemptive scheduling with blocking and pipelined item flow.

Semantics:

* Each core runs its highest-priority ready job, preemptively. Equal
  priorities do not preempt each other; they queue FIFO by release time,
  then stage id (then job index).
* A job suffers a blocking delay at release (the full B under
  ADVERSARIAL, uniform in [0, B] under UNIFORM, B being
  max(stage blocking, platform blocking of the host core)). The delay
  suspends the job without occupying the core; the core stays available
  to ready jobs.
* Source stages of an analytic release periodically (all at t = 0 under
  SYNCHRONOUS - the critical instant - or offset pseudo-randomly within
  one period under JITTERED). A one-shot stage releases exactly one job.
* Items flow through the topology: the job of a downstream stage for
  item n is released when its predecessors complete item n (parallel
  branches join on the latest completion), throttled so consecutive
  releases of one stage stay at least its inter-arrival apart.
* End-to-end response of item n runs from its source release to its last
  sink completion.

Identical inputs produce bit-identical traces: the seed fully determines
UNIFORM/JITTERED draws, and simultaneous events are ordered by
(time, {COMPLETE, BLOCK_END, RELEASE}, stage id, job index), followed by
the scheduler's PREEMPT/START/RESUME decisions in core-id order.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple

from .analysis import DIVERGED, InvalidAllocation, ResponseReport
from .model import (
    INFINITE,
    Cluster,
    Duration,
    Expr,
    Leaf,
    Seq,
    System,
)


class BlockingPolicy(Enum):
    ADVERSARIAL = "ADVERSARIAL"
    UNIFORM = "UNIFORM"


class ReleasePolicy(Enum):
    SYNCHRONOUS = "SYNCHRONOUS"
    JITTERED = "JITTERED"


class HorizonTooShort(Exception):
    """No item completed end-to-end within the horizon."""


@dataclass(frozen=True)
class SimConfig:
    horizon: Duration
    seed: int = 0
    blocking_policy: BlockingPolicy = BlockingPolicy.ADVERSARIAL
    release_policy: ReleasePolicy = ReleasePolicy.SYNCHRONOUS
    tie_policy: str = "FIFO"

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.tie_policy != "FIFO":
            raise ValueError("only FIFO tie-breaking is defined")


class SimEvent(NamedTuple):
    time: Duration
    core: str
    kind: str
    stage: str
    job: int


@dataclass
class SimTrace:
    events: list[SimEvent] = field(default_factory=list)
    job_responses: dict[tuple[str, int], Duration] = field(default_factory=dict)
    end_to_end_responses: dict[tuple[str, int], Duration] = field(
        default_factory=dict)


class WorstObserved(NamedTuple):
    per_stage: dict[str, Duration]
    per_analytic: dict[str, Duration]


class Violation(NamedTuple):
    kind: str  # "stage" | "analytic"
    id: str
    observed: Duration
    bound: Duration


# --- topology plumbing --------------------------------------------------------

def _sources(expr: Expr) -> list[str]:
    if isinstance(expr, Leaf):
        return [expr.stage]
    if isinstance(expr, Seq):
        return _sources(expr.children[0])
    out: list[str] = []
    for c in expr.children:
        out.extend(_sources(c))
    return out


def _sinks(expr: Expr) -> list[str]:
    if isinstance(expr, Leaf):
        return [expr.stage]
    if isinstance(expr, Seq):
        return _sinks(expr.children[-1])
    out: list[str] = []
    for c in expr.children:
        out.extend(_sinks(c))
    return out


def _collect_edges(expr: Expr, preds: dict[str, tuple[str, ...]]) -> None:
    if isinstance(expr, Leaf):
        return
    if isinstance(expr, Seq):
        for a, b in zip(expr.children, expr.children[1:]):
            upstream = tuple(sorted(_sinks(a)))
            for src in _sources(b):
                preds[src] = upstream
    for c in expr.children:
        _collect_edges(c, preds)


class _StageRt:
    __slots__ = ("id", "core", "prio", "cost", "period", "b_eff",
                 "preds", "analytic", "is_sink")

    def __init__(self, id, core, prio, cost, period, b_eff, preds,
                 analytic, is_sink):
        self.id = id
        self.core = core
        self.prio = prio
        self.cost = cost
        self.period = period  # None for one-shot
        self.b_eff = b_eff
        self.preds = preds  # None for sources
        self.analytic = analytic
        self.is_sink = is_sink


# event ranks: completions first, then blocking ends, then releases
_COMPLETE, _READY, _RELEASE = 0, 1, 2


def simulate(system: System, allocation: Mapping[str, str], cluster: Cluster,
             config: SimConfig) -> SimTrace:
    """Run the system until the horizon and return the trace.

    Requires an allocated, prioritized system (priorities and a host
    core for every stage). Raises HorizonTooShort when not a single item
    completes end-to-end.
    """
    core_ids = {c.id for c in cluster.cores}
    info: dict[str, _StageRt] = {}
    successors: dict[str, list[str]] = {}
    analytic_sinks: dict[str, int] = {}

    for analytic in system.analytics:
        preds: dict[str, tuple[str, ...]] = {}
        _collect_edges(analytic.topology, preds)
        sources = set(_sources(analytic.topology))
        sinks = set(_sinks(analytic.topology))
        analytic_sinks[analytic.id] = len(sinks)
        for s in analytic.stages:
            if s.priority is None:
                raise ValueError(f"stage {s.id!r} has no priority")
            if s.id not in allocation:
                raise InvalidAllocation(f"stage {s.id!r} has no core")
            core = allocation[s.id]
            if core not in core_ids:
                raise InvalidAllocation(
                    f"stage {s.id!r} mapped to unknown core {core!r}")
            period = (None if s.inter_arrival is INFINITE
                      else s.inter_arrival)
            info[s.id] = _StageRt(
                id=s.id, core=core, prio=s.priority, cost=s.cost,
                period=period,
                b_eff=max(s.blocking, cluster.core(core).platform_blocking),
                preds=None if s.id in sources else preds[s.id],
                analytic=analytic.id, is_sink=s.id in sinks)
        for sid, ups in preds.items():
            for up in ups:
                successors.setdefault(up, []).append(sid)
    for lst in successors.values():
        lst.sort()

    rng = random.Random(config.seed)
    horizon = config.horizon
    trace = SimTrace()
    emit = trace.events.append

    # first releases of source stages
    heap: list[tuple] = []
    for sid in sorted(info):
        st = info[sid]
        if st.preds is not None:
            continue
        if (config.release_policy is ReleasePolicy.JITTERED
                and st.period is not None):
            offset = rng.randrange(st.period)
        else:
            offset = 0
        if offset < horizon:
            heapq.heappush(heap, (offset, _RELEASE, sid, 0, 0))

    # per-core scheduler state
    ready: dict[str, list] = {c.id: [] for c in cluster.cores}
    running: dict[str, list | None] = {c.id: None for c in cluster.cores}
    # running record: [neg_prio, release, stage, job, dispatched_at, token]
    token_seq = 0

    # job state: (stage, job) -> [release, remaining, started]
    jobs: dict[tuple[str, int], list] = {}
    last_release: dict[str, Duration] = {}
    join_pending: dict[tuple[str, int], int] = {}
    item_start: dict[tuple[str, int], Duration] = {}
    sink_pending: dict[tuple[str, int], int] = {}

    def draw_blocking(st: _StageRt) -> Duration:
        if st.b_eff == 0:
            return 0
        if config.blocking_policy is BlockingPolicy.ADVERSARIAL:
            return st.b_eff
        return rng.randint(0, st.b_eff)

    def push_pipeline_release(sid: str, item: int, avail: Duration) -> None:
        st = info[sid]
        if st.period is None:
            if item != 0:
                return  # one-shot downstream: items past the first are dropped
            rel = avail
        elif item == 0:
            rel = avail
        else:
            rel = max(avail, last_release[sid] + st.period)
        last_release[sid] = rel
        if rel < horizon:
            heapq.heappush(heap, (rel, _RELEASE, sid, item, 0))

    def complete_item_at(sid: str, item: int, t: Duration) -> None:
        st = info[sid]
        if st.is_sink:
            key = (st.analytic, item)
            left = sink_pending.get(key, analytic_sinks[st.analytic]) - 1
            if left == 0:
                sink_pending.pop(key, None)
                trace.end_to_end_responses[key] = t - item_start[key]
            else:
                sink_pending[key] = left
        for succ in successors.get(sid, ()):  # join on all predecessors
            jkey = (succ, item)
            left = join_pending.get(jkey, len(info[succ].preds)) - 1
            if left == 0:
                join_pending.pop(jkey, None)
                push_pipeline_release(succ, item, t)
            else:
                join_pending[jkey] = left

    while heap and heap[0][0] <= horizon:
        t = heap[0][0]
        dirty: set[str] = set()
        while heap and heap[0][0] == t:
            _, rank, sid, job, token = heapq.heappop(heap)
            st = info[sid]
            if rank == _COMPLETE:
                run = running[st.core]
                if run is None or run[5] != token:
                    continue  # stale completion of a preempted dispatch
                running[st.core] = None
                dirty.add(st.core)
                emit(SimEvent(t, st.core, "COMPLETE", sid, job))
                rel = jobs[(sid, job)][0]
                trace.job_responses[(sid, job)] = t - rel
                complete_item_at(sid, job, t)
            elif rank == _READY:
                emit(SimEvent(t, st.core, "BLOCK_END", sid, job))
                heapq.heappush(ready[st.core],
                               (-st.prio, jobs[(sid, job)][0], sid, job))
                dirty.add(st.core)
            else:  # _RELEASE
                emit(SimEvent(t, st.core, "RELEASE", sid, job))
                jobs[(sid, job)] = [t, st.cost, False]
                if st.preds is None:
                    key = (st.analytic, job)
                    if key not in item_start or t < item_start[key]:
                        item_start[key] = t
                    if st.period is not None:
                        nxt = t + st.period
                        if nxt < horizon:
                            heapq.heappush(
                                heap, (nxt, _RELEASE, sid, job + 1, 0))
                delay = draw_blocking(st)
                if delay == 0:
                    heapq.heappush(ready[st.core], (-st.prio, t, sid, job))
                    dirty.add(st.core)
                elif t + delay <= horizon:
                    heapq.heappush(heap, (t + delay, _READY, sid, job, 0))

        for cid in sorted(dirty):
            rq = ready[cid]
            if not rq:
                continue
            run = running[cid]
            if run is not None:
                if rq[0][0] >= run[0]:
                    continue  # equal priority never preempts (FIFO)
                neg, rel, rsid, rjob, disp_at, _ = run
                jobs[(rsid, rjob)][1] -= t - disp_at
                emit(SimEvent(t, cid, "PREEMPT", rsid, rjob))
                heapq.heappush(rq, (neg, rel, rsid, rjob))
                running[cid] = None
            neg, rel, sid, job = heapq.heappop(rq)
            state = jobs[(sid, job)]
            emit(SimEvent(t, cid, "START" if not state[2] else "RESUME",
                          sid, job))
            state[2] = True
            token_seq += 1
            running[cid] = [neg, rel, sid, job, t, token_seq]
            heapq.heappush(heap, (t + state[1], _COMPLETE, sid, job, token_seq))

    if not trace.end_to_end_responses:
        raise HorizonTooShort(
            f"no item completed end-to-end within {config.horizon} ns")
    return trace


def worst_observed(trace: SimTrace) -> WorstObserved:
    """Maximum observed response per stage and per analytic; entries with
    no completed job/item are absent."""
    per_stage: dict[str, Duration] = {}
    for (sid, _job), resp in trace.job_responses.items():
        if resp > per_stage.get(sid, -1):
            per_stage[sid] = resp
    per_analytic: dict[str, Duration] = {}
    for (aid, _item), resp in trace.end_to_end_responses.items():
        if resp > per_analytic.get(aid, -1):
            per_analytic[aid] = resp
    return WorstObserved(per_stage=per_stage, per_analytic=per_analytic)


def verify_conservative(report: ResponseReport,
                        observed: WorstObserved) -> list[Violation]:
    """Empirical soundness check: every observed maximum must stay at or
    below its analytic bound. DIVERGED bounds assert nothing."""
    violations: list[Violation] = []
    for sid in sorted(observed.per_stage):
        bound = report.per_stage.get(sid)
        if bound is None or bound is DIVERGED:
            continue
        obs = observed.per_stage[sid]
        if obs > bound:
            violations.append(Violation("stage", sid, obs, bound))
    for aid in sorted(observed.per_analytic):
        verdict = report.per_analytic.get(aid)
        if verdict is None or verdict.end_to_end is DIVERGED:
            continue
        obs = observed.per_analytic[aid]
        if obs > verdict.end_to_end:
            violations.append(Violation("analytic", aid, obs,
                                        verdict.end_to_end))
    return violations


def trace_to_csv(trace: SimTrace) -> str:
    """Export as CSV with the exact header time_ns,core,kind,stage,job."""
    lines = ["time_ns,core,kind,stage,job"]
    for ev in trace.events:
        lines.append(f"{ev.time},{ev.core},{ev.kind},{ev.stage},{ev.job}")
    return "\n".join(lines) + "\n"
