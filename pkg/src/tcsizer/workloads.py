"""Built-in analytics scenarios and seeded random system generation.

The online scenarios are three-phase streams (generator -> splitter ->
counter) with fixed per-stage costs; the offline ones are four-phase
map-reduce chains (download -> map -> reduce -> sort) whose costs the
caller supplies, modeled as one-shot batch jobs. The priority showcase
scenario is a pair of one-shot, hour-long analytics with 1h and 2h
deadlines that only fit on one core when priorities reflect deadlines.
"""

from __future__ import annotations

import math
import random
from enum import Enum
from fractions import Fraction

from .model import (
    HOUR,
    INFINITE,
    MINUTE,
    MS,
    SEC,
    US,
    Analytic,
    Duration,
    InterArrival,
    Leaf,
    Par,
    Stage,
    System,
    seq,
)


class MissingParam(Exception):
    """A scenario parameter the caller must supply is absent."""


class ScenarioId(Enum):
    MICROBLOG_ONLINE = "microblog-online"
    MICROBLOG_OFFLINE = "microblog-offline"
    BOOK_ONLINE = "book-online"
    BOOK_OFFLINE = "book-offline"
    TABLE_VI = "table-vi"


# (generator, splitter, counter) worst-case costs, ns
_MICROBLOG_COSTS = (127 * US, 507 * US, 511 * US)
_BOOK_COSTS = (1_100 * US, 5 * MS, 800 * US)

_OFFLINE_PHASES = ("download", "map", "reduce", "sort")


def period_from_frequency(frequency_hz) -> Duration:
    """Events/second -> integer-ns period, floored (floor is the
    conservative direction: a smaller period means higher utilization)."""
    f = Fraction(frequency_hz)
    if f <= 0:
        raise ValueError("frequency must be positive")
    period = (SEC * f.denominator) // f.numerator
    if period < 1:
        raise ValueError(f"frequency {frequency_hz} exceeds 1 event/ns")
    return period


def builtin_system(scenario: ScenarioId, *, frequency_hz=None,
                   costs=None, splitter_hint: int = 1,
                   inter_arrival: InterArrival = INFINITE,
                   deadline: Duration | None = None,
                   blocking: Duration = 0) -> System:
    """Instantiate a built-in scenario.

    Online scenarios need ``frequency_hz``; offline ones need ``costs``
    (one per phase: download, map, reduce, sort). ``splitter_hint`` > 1
    turns the splitter phase into that many parallel replicas, each
    seeing every k-th item. Per-stage deadlines default to the end-to-end
    deadline so that high-rate templates stay structurally valid; sweeps
    re-derive tighter per-stage deadlines themselves.
    """
    if scenario is ScenarioId.MICROBLOG_ONLINE:
        return _online("microblog", _MICROBLOG_COSTS, frequency_hz,
                       splitter_hint, deadline or SEC, blocking)
    if scenario is ScenarioId.BOOK_ONLINE:
        return _online("book", _BOOK_COSTS, frequency_hz,
                       splitter_hint, deadline or SEC, blocking)
    if scenario is ScenarioId.MICROBLOG_OFFLINE:
        return _offline("microblog-batch", costs, inter_arrival,
                        deadline or 2 * HOUR, blocking)
    if scenario is ScenarioId.BOOK_OFFLINE:
        return _offline("book-batch", costs, inter_arrival,
                        deadline or 10 * MINUTE, blocking)
    if scenario is ScenarioId.TABLE_VI:
        return _priority_pair()
    raise ValueError(f"unknown scenario {scenario!r}")


def _online(name: str, stage_costs, frequency_hz, splitter_hint: int,
            e2e_deadline: Duration, blocking: Duration) -> System:
    if frequency_hz is None:
        raise MissingParam(f"{name}: online scenarios need frequency_hz")
    if splitter_hint < 1:
        raise ValueError("splitter_hint must be >= 1")
    t_in = period_from_frequency(frequency_hz)
    c_gen, c_split, c_count = stage_costs

    def mk(sid, cost, t):
        return Stage(id=sid, cost=cost, inter_arrival=t,
                     deadline=e2e_deadline, blocking=blocking)

    generator = mk(f"{name}-gen", c_gen, t_in)
    counter = mk(f"{name}-count", c_count, t_in)
    if splitter_hint == 1:
        splitters = [mk(f"{name}-split", c_split, t_in)]
        middle = Leaf(splitters[0].id)
    else:
        # each replica sees every k-th item
        splitters = [mk(f"{name}-split#{i}", c_split, splitter_hint * t_in)
                     for i in range(1, splitter_hint + 1)]
        middle = Par(tuple(Leaf(s.id) for s in splitters))
    stages = (generator, *splitters, counter)
    topo = seq(Leaf(generator.id), middle, Leaf(counter.id))
    return System((Analytic(id=name, stages=stages, topology=topo,
                            end_to_end_deadline=e2e_deadline),))


def _offline(name: str, costs, inter_arrival: InterArrival,
             e2e_deadline: Duration, blocking: Duration) -> System:
    if costs is None:
        raise MissingParam(
            f"{name}: offline scenarios need per-phase costs "
            f"{_OFFLINE_PHASES}")
    if len(costs) != len(_OFFLINE_PHASES):
        raise MissingParam(
            f"{name}: expected {len(_OFFLINE_PHASES)} costs, got {len(costs)}")
    stages = tuple(
        Stage(id=f"{name}-{phase}", cost=cost, inter_arrival=inter_arrival,
              deadline=e2e_deadline, blocking=blocking)
        for phase, cost in zip(_OFFLINE_PHASES, costs))
    topo = seq(*(s.id for s in stages))
    return System((Analytic(id=name, stages=stages, topology=topo,
                            end_to_end_deadline=e2e_deadline),))


def _priority_pair() -> System:
    """Two one-shot analytics, 1h of work each, deadlines 2h and 1h."""
    def one_shot(sid: str, d: Duration) -> Analytic:
        stage = Stage(id=sid, cost=HOUR, inter_arrival=INFINITE, deadline=d)
        return Analytic(id=sid, stages=(stage,), topology=Leaf(sid),
                        end_to_end_deadline=d)
    return System((one_shot("TC1", 2 * HOUR), one_shot("TC2", HOUR)))


def random_system(n_stages: int, u_target: float, t_range: tuple[int, int],
                  seed: int) -> System:
    """Seeded random single-analytic chain for property testing.

    Per-stage utilizations come from uniform simplex splitting of
    ``u_target``; periods are log-uniform over ``t_range`` (integer ns);
    costs are floor(u*T) clamped to >= 1 ns, so the realized total never
    exceeds the target; D = T, B = 0; the topology is the sequential
    chain and the analytic deadline is the sum of stage deadlines.
    """
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    if not 0 < u_target <= n_stages:
        raise ValueError("u_target must be in (0, n_stages]")
    lo, hi = t_range
    if not (0 < lo <= hi):
        raise ValueError("t_range must be a positive interval")
    rng = random.Random(seed)
    utils = _uunifast(rng, u_target, n_stages)
    stages = []
    for i, u in enumerate(utils):
        t = int(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        t = max(lo, min(t, hi))
        c = max(1, math.floor(u * t))
        stages.append(Stage(id=f"s{i:02d}", cost=c, inter_arrival=t,
                            deadline=t))
    topo = seq(*(s.id for s in stages))
    return System((Analytic(
        id=f"rand-{seed}", stages=tuple(stages), topology=topo,
        end_to_end_deadline=sum(s.deadline for s in stages)),))


def _uunifast(rng: random.Random, total: float, n: int) -> list[float]:
    remaining = total
    utils = []
    for i in range(n - 1):
        nxt = remaining * rng.random() ** (1.0 / (n - i - 1))
        utils.append(remaining - nxt)
        remaining = nxt
    utils.append(remaining)
    return utils
