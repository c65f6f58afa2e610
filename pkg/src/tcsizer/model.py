"""Domain model for time-critical analytics pipelines.

An analytic is a series-parallel graph of stages. Each stage is one
schedulable segment characterized by a worst-case cost C, a minimum
inter-arrival time T, a deadline D, a blocking term B, a fixed priority,
and a host core. All times are integer nanoseconds; Python integers make
overflow a non-issue. A stage whose inter-arrival is ``INFINITE`` is
one-shot: it executes exactly once (hour-scale batch jobs are modeled
this way).

Priorities are integers, larger value = higher priority. ``None`` means
unassigned (for priorities and for host cores).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Mapping, Union

# Duration helpers (integer nanoseconds).
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000
MINUTE = 60 * SEC
HOUR = 3_600 * SEC


class Marker:
    """Identity-compared singleton used for INFINITE / DIVERGED values."""

    __slots__ = ("_label",)

    def __init__(self, label: str):
        self._label = label

    def __repr__(self) -> str:
        return self._label

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


#: Inter-arrival time of a one-shot stage.
INFINITE = Marker("INFINITE")

Duration = int
InterArrival = Union[int, Marker]


def is_infinite(value: InterArrival) -> bool:
    return value is INFINITE


class ReplicationExceeded(Exception):
    """Rate replication would need more replicas than allowed."""

    def __init__(self, stage_id: str, needed: int, k_max: int):
        super().__init__(
            f"stage {stage_id!r} needs {needed} replicas, limit is {k_max}")
        self.stage_id = stage_id
        self.needed = needed
        self.k_max = k_max


class AllocationFailed(Exception):
    """No core has room for a stage during first-fit placement."""

    def __init__(self, stage_id: str):
        super().__init__(f"no core can host stage {stage_id!r}")
        self.stage_id = stage_id


@dataclass(frozen=True)
class Stage:
    """One schedulable segment of an analytic.

    ``cost``, ``deadline`` and ``blocking`` are integer nanoseconds;
    ``inter_arrival`` is either integer nanoseconds or ``INFINITE``.
    """

    id: str
    cost: Duration
    inter_arrival: InterArrival
    deadline: Duration
    blocking: Duration = 0
    priority: int | None = None
    core: str | None = None

    def utilization(self) -> Fraction:
        """C/T as an exact rational; one-shot stages contribute 0."""
        if self.inter_arrival is INFINITE:
            return Fraction(0)
        return Fraction(self.cost, self.inter_arrival)


# --- series-parallel composition expressions ---------------------------------

@dataclass(frozen=True)
class Leaf:
    stage: str


@dataclass(frozen=True)
class Seq:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Par:
    children: tuple["Expr", ...]


Expr = Union[Leaf, Seq, Par]


def _coerce(node: "Expr | str") -> Expr:
    return Leaf(node) if isinstance(node, str) else node


def seq(*children: "Expr | str") -> Expr:
    """Sequential composition; bare strings become leaves."""
    items = tuple(_coerce(c) for c in children)
    return items[0] if len(items) == 1 else Seq(items)


def par(*children: "Expr | str") -> Expr:
    """Parallel composition; bare strings become leaves."""
    items = tuple(_coerce(c) for c in children)
    return items[0] if len(items) == 1 else Par(items)


def leaves(expr: Expr) -> Iterator[str]:
    """Stage ids in left-to-right leaf order."""
    if isinstance(expr, Leaf):
        yield expr.stage
    elif isinstance(expr, (Seq, Par)):
        for child in expr.children:
            yield from leaves(child)
    else:
        raise TypeError(f"not a composition expression: {expr!r}")


@dataclass(frozen=True)
class Analytic:
    """A set of stages plus their composition and an end-to-end deadline."""

    id: str
    stages: tuple[Stage, ...]
    topology: Expr
    end_to_end_deadline: Duration

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    def stage(self, stage_id: str) -> Stage:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise KeyError(stage_id)


@dataclass(frozen=True)
class System:
    analytics: tuple[Analytic, ...]

    def __post_init__(self):
        object.__setattr__(self, "analytics", tuple(self.analytics))

    def stages(self) -> Iterator[Stage]:
        for analytic in self.analytics:
            yield from analytic.stages

    def stage(self, stage_id: str) -> Stage:
        for s in self.stages():
            if s.id == stage_id:
                return s
        raise KeyError(stage_id)

    def analytic_of(self, stage_id: str) -> Analytic:
        for analytic in self.analytics:
            for s in analytic.stages:
                if s.id == stage_id:
                    return analytic
        raise KeyError(stage_id)


@dataclass(frozen=True)
class Core:
    """A scheduling unit: normalized capacity plus platform blocking."""

    id: str
    capacity: Fraction = Fraction(1)
    platform_blocking: Duration = 0

    def __post_init__(self):
        cap = self.capacity
        if not isinstance(cap, Fraction):
            cap = Fraction(cap)
            object.__setattr__(self, "capacity", cap)
        if not 0 < cap <= 1:
            raise ValueError(f"core {self.id!r}: capacity must be in (0, 1]")
        if self.platform_blocking < 0:
            raise ValueError(f"core {self.id!r}: negative platform blocking")


@dataclass(frozen=True)
class Cluster:
    cores: tuple[Core, ...]

    def __post_init__(self):
        object.__setattr__(self, "cores", tuple(self.cores))
        if not self.cores:
            raise ValueError("cluster must have at least one core")
        ids = [c.id for c in self.cores]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate core ids in cluster")

    def core(self, core_id: str) -> Core:
        for c in self.cores:
            if c.id == core_id:
                return c
        raise KeyError(core_id)


def homogeneous_cluster(m: int, capacity=Fraction(1),
                        platform_blocking: Duration = 0) -> Cluster:
    """m identical cores named c0..c{m-1}."""
    cap = capacity if isinstance(capacity, Fraction) else Fraction(capacity)
    return Cluster(tuple(
        Core(f"c{i}", cap, platform_blocking) for i in range(m)))


# --- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    """Findings are (path, message) pairs; ok iff there are none."""

    findings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, path: str, message: str) -> None:
        self.findings.append((path, message))


def validate_system(system: System) -> ValidationReport:
    """Check every structural invariant; never raises.

    Deliberately does *not* reject deadline > inter_arrival + blocking:
    that regime is only refused by the utilization-bound path.
    """
    report = ValidationReport()
    seen_analytics: set[str] = set()
    seen_stages: set[str] = set()

    for ai, analytic in enumerate(system.analytics):
        apath = f"/analytics/{ai}"
        if analytic.id in seen_analytics:
            report.add(f"{apath}/id", f"duplicate analytic id {analytic.id!r}")
        seen_analytics.add(analytic.id)

        if analytic.end_to_end_deadline <= 0:
            report.add(f"{apath}/end_to_end_deadline",
                       "end-to-end deadline must be positive")

        for si, stage in enumerate(analytic.stages):
            spath = f"{apath}/stages/{si}"
            if stage.id in seen_stages:
                report.add(f"{spath}/id", f"duplicate stage id {stage.id!r}")
            seen_stages.add(stage.id)
            # INFINITE is legal only as an inter-arrival time
            finite_fields = True
            for field_name in ("cost", "deadline", "blocking"):
                value = getattr(stage, field_name)
                if not isinstance(value, int):
                    report.add(f"{spath}/{field_name}",
                               f"{field_name} must be integer nanoseconds")
                    finite_fields = False
                elif value < 0:
                    report.add(f"{spath}/{field_name}",
                               f"negative {field_name}")
            if stage.inter_arrival is not INFINITE:
                if not isinstance(stage.inter_arrival, int):
                    report.add(f"{spath}/inter_arrival",
                               "inter-arrival must be integer ns or INFINITE")
                elif stage.inter_arrival <= 0:
                    report.add(f"{spath}/inter_arrival",
                               "finite inter-arrival must be positive")
            if finite_fields and stage.cost > stage.deadline:
                report.add(f"{spath}/cost", "cost exceeds deadline")

        _check_topology(analytic, apath, report)

    return report


def _check_topology(analytic: Analytic, apath: str,
                    report: ValidationReport) -> None:
    declared = {s.id for s in analytic.stages}
    covered: set[str] = set()
    try:
        leaf_ids = list(leaves(analytic.topology))
    except TypeError:
        report.add(f"{apath}/topology", "malformed composition expression")
        return
    if _has_empty_node(analytic.topology):
        report.add(f"{apath}/topology", "empty composition node")
    for sid in leaf_ids:
        if sid not in declared:
            report.add(f"{apath}/topology",
                       f"topology references unknown stage {sid!r}")
        elif sid in covered:
            report.add(f"{apath}/topology", f"stage {sid!r} covered twice")
        covered.add(sid)
    for sid in sorted(declared - covered):
        report.add(f"{apath}/topology", f"stage {sid!r} not covered")


def _has_empty_node(expr: Expr) -> bool:
    if isinstance(expr, (Seq, Par)):
        return not expr.children or any(
            _has_empty_node(c) for c in expr.children)
    return False


# --- priority assignment ------------------------------------------------------

def assign_priorities_dm(system: System) -> dict[str, int]:
    """Deadline-monotonic priorities: strictly smaller deadline, strictly
    higher priority; ties broken by stage id (lexicographically smaller id
    wins). Returns dense integers, larger = higher priority.
    """
    ordered = sorted(system.stages(), key=lambda s: (s.deadline, s.id))
    return {s.id: len(ordered) - i for i, s in enumerate(ordered)}


def with_priorities(system: System, priorities: Mapping[str, int]) -> System:
    """Copy of the system with priorities applied (ids absent from the
    mapping keep their current priority)."""
    return _map_stages(
        system,
        lambda s: replace(s, priority=priorities[s.id])
        if s.id in priorities else s)


def with_allocation(system: System, allocation: Mapping[str, str]) -> System:
    """Copy of the system with host cores applied."""
    return _map_stages(
        system,
        lambda s: replace(s, core=allocation[s.id])
        if s.id in allocation else s)


def _map_stages(system: System, fn) -> System:
    return System(tuple(
        replace(a, stages=tuple(fn(s) for s in a.stages))
        for a in system.analytics))


# --- rate-driven replication --------------------------------------------------

def replicate_for_rate(stage: Stage, k_max: int) -> list[Stage]:
    """Split an over-rate stage (C > T) into k = ceil(C/T) replicas.

    Each replica sees every k-th input item, so its inter-arrival becomes
    k*T while the cost stays put; the deadline is capped at k*T + B. A
    stage with C <= T is returned unchanged.
    """
    if stage.inter_arrival is INFINITE:
        raise ValueError(f"stage {stage.id!r}: cannot replicate a one-shot stage")
    if k_max < 1:
        raise ValueError("k_max must be positive")
    k = -(-stage.cost // stage.inter_arrival)
    if k <= 1:
        return [stage]
    if k > k_max:
        raise ReplicationExceeded(stage.id, k, k_max)
    t_new = k * stage.inter_arrival
    d_new = min(stage.deadline, t_new + stage.blocking)
    return [
        replace(stage, id=f"{stage.id}#{i}", inter_arrival=t_new,
                deadline=d_new)
        for i in range(1, k + 1)
    ]


# --- first-fit-decreasing allocation ------------------------------------------

def allocate_first_fit(system: System, cluster: Cluster) -> dict[str, str]:
    """Place stages on cores, heaviest utilization first (ties by stage
    id), each on the first core whose accumulated utilization stays within
    its capacity. Raises AllocationFailed naming the first unplaceable
    stage.
    """
    order = sorted(system.stages(), key=lambda s: (-s.utilization(), s.id))
    load: dict[str, Fraction] = {c.id: Fraction(0) for c in cluster.cores}
    placement: dict[str, str] = {}
    for stage in order:
        u = stage.utilization()
        for core in cluster.cores:
            if load[core.id] + u <= core.capacity:
                load[core.id] += u
                placement[stage.id] = core.id
                break
        else:
            raise AllocationFailed(stage.id)
    return placement
