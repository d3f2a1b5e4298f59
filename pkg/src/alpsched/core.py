"""Problem model for single-runway aircraft landing scheduling.

Domain types (aircraft, instances, schedules), feasibility checking against
wake-vortex separation / time-window / precedence constraints, and the
evaluation metrics (tiered delay cost, runway throughput, delay histogram).

All types are immutable values; every operation here is a pure function, so
instances and schedules can be evaluated in parallel without shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np

#: Extra seconds added on top of every separation requirement (safety buffer).
DEFAULT_BUFFER_S = 30.0

#: Delay tier boundaries in seconds: per-second cost coefficients switch at
#: 300 / 900 / 1800 s, with the last coefficient open-ended past 1800 s.
TIER_BOUNDS_S = (300.0, 900.0, 1800.0)


class WakeClass(IntEnum):
    """Wake turbulence category; the ordinal code is fixed (Heavy=0 .. Light=2)."""

    HEAVY = 0
    MEDIUM = 1
    LIGHT = 2

    @classmethod
    def from_letter(cls, letter: str) -> "WakeClass":
        try:
            return _WAKE_LETTERS[letter.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown wake category {letter!r} (expected H, M or L)") from None

    @property
    def letter(self) -> str:
        return "HML"[int(self)]


_WAKE_LETTERS = {"H": WakeClass.HEAVY, "M": WakeClass.MEDIUM, "L": WakeClass.LIGHT}

#: ICAO-style minimum separation seconds, indexed [leading][following].
DEFAULT_SEPARATION_S = (
    (96.0, 157.0, 240.0),  # Heavy leading
    (60.0, 69.0, 156.0),   # Medium leading
    (60.0, 69.0, 82.0),    # Light leading
)


@dataclass(frozen=True)
class SeparationMatrix:
    """3x3 grid of minimum separation seconds, indexed (lead class, follow class)."""

    seconds: tuple[tuple[float, float, float], ...] = DEFAULT_SEPARATION_S

    def __post_init__(self):
        if len(self.seconds) != 3 or any(len(row) != 3 for row in self.seconds):
            raise ValueError("separation matrix must be 3x3")
        if any(v <= 0 for row in self.seconds for v in row):
            raise ValueError("separation entries must be positive")

    def lookup(self, lead: WakeClass, follow: WakeClass) -> float:
        return self.seconds[int(lead)][int(follow)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.seconds, dtype=float)


def required_separation(lead: WakeClass, follow: WakeClass, m: SeparationMatrix | None = None) -> float:
    """Minimum seconds between a landing of class `lead` and a following `follow`."""
    return (m or SeparationMatrix()).lookup(lead, follow)


@dataclass(frozen=True)
class CostProfile:
    """Per-second delay cost coefficients for the 0-300/300-900/900-1800/1800+ tiers.

    Legacy two-coefficient instances (linear early/late penalties) are stored as a
    constant-rate profile: all four tier coefficients equal the lateness rate and
    `early` carries the per-second earliness rate.  Tiered profiles keep
    ``early == 0`` so earliness is free.
    """

    c300: float
    c900: float
    c1800: float
    c3600: float
    early: float = 0.0
    linear: bool = False

    def __post_init__(self):
        for name in ("c300", "c900", "c1800", "c3600", "early"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"cost coefficient {name} must be finite and >= 0, got {v}")

    @classmethod
    def from_linear(cls, early_rate: float, late_rate: float) -> "CostProfile":
        return cls(late_rate, late_rate, late_rate, late_rate, early=early_rate, linear=True)

    @property
    def tier_rates(self) -> tuple[float, float, float, float]:
        return (self.c300, self.c900, self.c1800, self.c3600)


def tiered_delay_cost(delay_s: float, profile: CostProfile) -> float:
    """Cost of landing `delay_s` seconds late under a tiered profile.

    Each tier charges its per-second rate only for the seconds of delay that
    fall inside the tier, so the total is continuous and nondecreasing in the
    delay, and collapses to ``rate * delay`` when all four rates are equal.
    """
    if delay_s < 0:
        raise ValueError(f"delay must be >= 0, got {delay_s}")
    d = float(delay_s)
    return (
        profile.c300 * min(d, 300.0)
        + profile.c900 * min(max(d - 300.0, 0.0), 600.0)
        + profile.c1800 * min(max(d - 900.0, 0.0), 900.0)
        + profile.c3600 * max(d - 1800.0, 0.0)
    )


@dataclass(frozen=True)
class Aircraft:
    """One arriving aircraft with its time window and cost profile.

    Times are seconds from a common origin: `target` is the scheduled landing
    time, `ata` the radar/actual arrival used for first-come ordering, and
    [earliest, latest] the hard landing window.
    """

    id: int
    wake: WakeClass
    target: float
    earliest: float
    latest: float
    cost: CostProfile
    ata: float | None = None
    model: str = ""

    def __post_init__(self):
        times = (self.target, self.earliest, self.latest)
        if not all(np.isfinite(t) for t in times) or any(t < 0 for t in times):
            raise ValueError(f"aircraft {self.id}: times must be finite and >= 0, got {times}")
        if not self.earliest <= self.target <= self.latest:
            raise ValueError(
                f"aircraft {self.id}: window must satisfy E <= T <= L, "
                f"got E={self.earliest}, T={self.target}, L={self.latest}"
            )
        if self.ata is None:
            object.__setattr__(self, "ata", float(self.target))

    @property
    def window_width(self) -> float:
        return self.latest - self.earliest


@dataclass(frozen=True)
class Instance:
    """A scheduling problem: aircraft, separation rules, buffer, precedence.

    `precedence` holds ordered id pairs (i, j) meaning i must land strictly
    before j.  `pair_separation` optionally overrides the class matrix with a
    per-pair n x n seconds matrix indexed by aircraft position (benchmark
    files carry such matrices).
    """

    aircraft: tuple[Aircraft, ...]
    separation: SeparationMatrix = field(default_factory=SeparationMatrix)
    buffer_s: float = DEFAULT_BUFFER_S
    precedence: frozenset[tuple[int, int]] = frozenset()
    pair_separation: tuple[tuple[float, ...], ...] | None = None
    name: str = ""

    def __post_init__(self):
        if len(self.aircraft) < 1:
            raise ValueError("instance needs at least one aircraft")
        ids = [a.id for a in self.aircraft]
        if len(set(ids)) != len(ids):
            raise ValueError("aircraft ids must be unique")
        if self.buffer_s < 0:
            raise ValueError("buffer must be >= 0")
        known = set(ids)
        for i, j in self.precedence:
            if i not in known or j not in known or i == j:
                raise ValueError(f"bad precedence pair ({i}, {j})")
        _check_acyclic(self.precedence)
        if self.pair_separation is not None:
            m = self.pair_separation
            if len(m) != len(ids) or any(len(row) != len(ids) for row in m):
                raise ValueError("pair separation matrix must be n x n")

    @property
    def n(self) -> int:
        return len(self.aircraft)

    def by_id(self, aircraft_id: int) -> Aircraft:
        try:
            return self._id_map[aircraft_id]
        except KeyError:
            raise KeyError(f"unknown aircraft id {aircraft_id}") from None

    def index_of(self, aircraft_id: int) -> int:
        self.by_id(aircraft_id)
        return self._index_map[aircraft_id]

    @cached_property
    def _id_map(self) -> dict[int, Aircraft]:
        return {a.id: a for a in self.aircraft}

    @cached_property
    def _index_map(self) -> dict[int, int]:
        return {a.id: k for k, a in enumerate(self.aircraft)}

    def separation_between(self, lead_id: int, follow_id: int) -> float:
        """Required seconds (before buffer) when `lead_id` lands ahead of `follow_id`."""
        if self.pair_separation is not None:
            return self.pair_separation[self.index_of(lead_id)][self.index_of(follow_id)]
        return self.separation.lookup(self.by_id(lead_id).wake, self.by_id(follow_id).wake)

    def separation_array(self) -> np.ndarray:
        """n x n separation seconds indexed by aircraft position (lead, follow)."""
        if self.pair_separation is not None:
            return np.asarray(self.pair_separation, dtype=float)
        classes = np.array([int(a.wake) for a in self.aircraft])
        return self.separation.as_array()[np.ix_(classes, classes)]

    def must_precede(self, i: int, j: int) -> bool:
        return (i, j) in self.precedence


def _check_acyclic(pairs) -> None:
    succ: dict[int, list[int]] = {}
    for i, j in pairs:
        succ.setdefault(i, []).append(j)
    seen: dict[int, int] = {}  # 1 = on stack, 2 = done

    def visit(node):
        state = seen.get(node)
        if state == 1:
            raise ValueError("precedence set contains a cycle")
        if state == 2:
            return
        seen[node] = 1
        for nxt in succ.get(node, ()):
            visit(nxt)
        seen[node] = 2

    for start in list(succ):
        visit(start)


@dataclass(frozen=True)
class Deviation:
    """Split of landing-time deviation into earliness and lateness seconds."""

    earliness: float
    lateness: float


def deviation(landing_time: float, target: float) -> Deviation:
    """Earliness/lateness split: exactly one side is nonzero and their
    difference reconstructs ``landing_time - target``."""
    return Deviation(max(target - landing_time, 0.0), max(landing_time - target, 0.0))


@dataclass(frozen=True)
class Schedule:
    """Assignment of landing times (seconds) to aircraft ids."""

    times: dict[int, float]

    def __post_init__(self):
        object.__setattr__(self, "times", dict(self.times))

    def __len__(self) -> int:
        return len(self.times)

    def time_of(self, aircraft_id: int) -> float:
        return self.times[aircraft_id]

    def order(self) -> list[int]:
        """Ids sorted by landing time, ties broken by id."""
        return sorted(self.times, key=lambda i: (self.times[i], i))

    def lands_before(self, i: int, j: int) -> bool:
        """Ordering relation: i before j by landing time, ties broken by id."""
        return (self.times[i], i) < (self.times[j], j)


class ViolationKind(IntEnum):
    WINDOW = 0
    SEPARATION = 1
    PRECEDENCE = 2


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    ids: tuple[int, ...]
    required: float
    actual: float

    def __str__(self) -> str:
        who = "/".join(str(i) for i in self.ids)
        return f"{self.kind.name.lower()}[{who}] required {self.required:g}, got {self.actual:g}"


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...]

    @property
    def feasible(self) -> bool:
        return not self.violations

    def count(self, kind: ViolationKind | None = None) -> int:
        if kind is None:
            return len(self.violations)
        return sum(1 for v in self.violations if v.kind == kind)


def validate_schedule(inst: Instance, schedule: Schedule) -> ViolationReport:
    """Check a complete schedule against windows, pairwise separation + buffer,
    and precedence.  Separation is looked up with the earlier-landing aircraft
    as lead (ties broken by id, and always violate since separations are > 0).
    """
    for aid in schedule.times:
        inst.by_id(aid)  # raises on unknown id
    missing = [a.id for a in inst.aircraft if a.id not in schedule.times]
    if missing:
        raise ValueError(f"schedule is missing aircraft {missing}")

    out: list[Violation] = []
    for a in inst.aircraft:
        x = schedule.time_of(a.id)
        if not a.earliest <= x <= a.latest:
            bound = a.earliest if x < a.earliest else a.latest
            out.append(Violation(ViolationKind.WINDOW, (a.id,), bound, x))

    ids = [a.id for a in inst.aircraft]
    for k, i in enumerate(ids):
        xi = schedule.time_of(i)
        for j in ids[k + 1 :]:
            xj = schedule.time_of(j)
            lead, follow = (i, j) if schedule.lands_before(i, j) else (j, i)
            need = inst.separation_between(lead, follow) + inst.buffer_s
            gap = abs(xi - xj)
            if gap < need:
                out.append(Violation(ViolationKind.SEPARATION, (lead, follow), need, gap))

    for i, j in sorted(inst.precedence):
        if not schedule.lands_before(i, j):
            out.append(Violation(ViolationKind.PRECEDENCE, (i, j), schedule.time_of(j), schedule.time_of(i)))

    return ViolationReport(tuple(out))


def total_cost(inst: Instance, schedule: Schedule) -> float:
    """Sum of per-aircraft deviation costs; defined for infeasible schedules too.

    Tiered profiles charge lateness only; constant-rate legacy profiles add
    their linear earliness term.
    """
    cost = 0.0
    for a in inst.aircraft:
        dev = deviation(schedule.time_of(a.id), a.target)
        cost += tiered_delay_cost(dev.lateness, a.cost)
        cost += a.cost.early * dev.earliness
    return cost


def runway_throughput(schedule: Schedule) -> int:
    """Max aircraft landed in any one-hour window, counted over half-open
    windows [t, t+3600) anchored at each landing time (the sliding-window
    maximum is always attained at an anchor)."""
    if not schedule.times:
        raise ValueError("throughput of an empty schedule is undefined")
    times = np.sort(np.fromiter(schedule.times.values(), dtype=float))
    # count of landings in [t, t+3600) for each anchor t
    hi = np.searchsorted(times, times + 3600.0, side="left")
    lo = np.arange(len(times))
    return int((hi - lo).max())


def delay_histogram(inst: Instance, schedule: Schedule, bin_width_s: float) -> np.ndarray:
    """Counts of per-aircraft lateness seconds in bins [k*w, (k+1)*w)."""
    if bin_width_s <= 0:
        raise ValueError("bin width must be > 0")
    delays = [deviation(schedule.time_of(a.id), a.target).lateness for a in inst.aircraft]
    nbins = int(max(delays) // bin_width_s) + 1
    counts = np.zeros(nbins, dtype=int)
    for d in delays:
        counts[int(d // bin_width_s)] += 1
    return counts
