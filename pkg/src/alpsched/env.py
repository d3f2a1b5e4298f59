"""Sequential landing-assignment MDP.

One episode schedules every aircraft of an instance, one landing time per
step.  This module owns the per-aircraft feature math (normalized times,
urgency, window criticality, category priority, cost factor, and the combined
priority score), the shaped reward, and the immutable environment state with
its step/reset transitions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Aircraft, CostProfile, Instance, WakeClass, deviation, tiered_delay_cost
from .safety import validate_separation

#: Reference window width in seconds (25 minutes) used to normalize window
#: criticality and time differences.
CRITICALITY_SPAN_S = 1500.0

#: Raw urgency mixes the four tier rates with rising weight on the
#: long-delay coefficients.
URGENCY_TIER_WEIGHTS = (0.1, 0.2, 0.3, 0.4)

#: Sentinel feature value for "no landing time assigned yet".
UNASSIGNED = -1.0


@dataclass(frozen=True)
class PriorityWeights:
    """Convex weights over (urgency, window criticality, category, cost factor)."""

    urgency: float = 0.4
    criticality: float = 0.2
    category: float = 0.2
    cost: float = 0.2

    def __post_init__(self):
        w = self.as_tuple()
        if any(x < 0 for x in w):
            raise ValueError("priority weights must be >= 0")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"priority weights must sum to 1, got {sum(w)}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.urgency, self.criticality, self.category, self.cost)


@dataclass(frozen=True)
class RewardWeights:
    """Weights over the delay / separation / throughput / smoothness terms."""

    delay: float = 1.0
    separation: float = 2.0
    throughput: float = 0.5
    smoothness: float = 0.3

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.delay, self.separation, self.throughput, self.smoothness)


def horizon(inst: Instance) -> tuple[float, float]:
    """Normalization horizon: [min earliest, max latest] over the fleet."""
    return (min(a.earliest for a in inst.aircraft), max(a.latest for a in inst.aircraft))


def normalize_time(t: float, lo: float, hi: float) -> float:
    """Affine map of t onto [0, 1] over [lo, hi]; a degenerate single-point
    horizon maps everything to 0.5."""
    if hi <= lo:
        return 0.5
    return (t - lo) / (hi - lo)


def time_criticality(earliest: float, latest: float) -> float:
    """Tightness of the landing window, 1 at zero width, 0 at or beyond the
    25-minute reference span (clamped so wide legacy windows stay in range)."""
    if latest < earliest:
        raise ValueError("window must satisfy L >= E")
    return float(np.clip(1.0 - (latest - earliest) / CRITICALITY_SPAN_S, 0.0, 1.0))


def category_priority(wake: WakeClass) -> float:
    """Heavy 1.0, Medium 0.5, Light 0.0."""
    return 1.0 - int(wake) / 2.0


def raw_urgency(profile, weights=URGENCY_TIER_WEIGHTS) -> float:
    return float(np.dot(weights, profile.tier_rates))


def urgency(aircraft: Aircraft, fleet: tuple[Aircraft, ...], weights=URGENCY_TIER_WEIGHTS) -> float:
    """Min-max normalized raw urgency over the fleet; 0.5 when the fleet is
    uniform (degenerate min-max)."""
    if not fleet:
        raise ValueError("fleet must be nonempty")
    values = [raw_urgency(a.cost, weights) for a in fleet]
    lo, hi = min(values), max(values)
    if hi <= lo:
        return 0.5
    return (raw_urgency(aircraft.cost, weights) - lo) / (hi - lo)


def cost_factor(aircraft: Aircraft, fleet: tuple[Aircraft, ...]) -> float:
    """Mean of the aircraft's tier rates relative to the fleet maximum per
    tier; tiers where the whole fleet is zero contribute 0."""
    total = 0.0
    for k in range(4):
        peak = max(a.cost.tier_rates[k] for a in fleet)
        if peak > 0:
            total += aircraft.cost.tier_rates[k] / peak
    return total / 4.0


def priority_score(aircraft: Aircraft, fleet: tuple[Aircraft, ...], weights: PriorityWeights) -> float:
    """Convex combination of urgency, window criticality, category priority,
    and cost factor; lands in [0, 1]."""
    w1, w2, w3, w4 = weights.as_tuple()
    return (
        w1 * urgency(aircraft, fleet)
        + w2 * time_criticality(aircraft.earliest, aircraft.latest)
        + w3 * category_priority(aircraft.wake)
        + w4 * cost_factor(aircraft, fleet)
    )


def priority_order(inst: Instance, weights: PriorityWeights | None = None) -> list[int]:
    """Aircraft ids by descending priority score, ties broken by id."""
    weights = weights or PriorityWeights()
    scored = [(priority_score(a, inst.aircraft, weights), a.id) for a in inst.aircraft]
    return [aid for _, aid in sorted(scored, key=lambda t: (-t[0], t[1]))]


def aircraft_features(
    aircraft: Aircraft,
    inst: Instance,
    weights: PriorityWeights,
    assigned_time: float | None = None,
) -> np.ndarray:
    """Feature row [t_norm, onehot(wake), urgency, E_norm, L_norm, priority,
    assigned_norm]; the assigned channel is -1 until a time is set."""
    lo, hi = horizon(inst)
    onehot = np.zeros(3)
    onehot[int(aircraft.wake)] = 1.0
    assigned = UNASSIGNED if assigned_time is None else normalize_time(assigned_time, lo, hi)
    return np.array(
        [
            normalize_time(aircraft.target, lo, hi),
            *onehot,
            urgency(aircraft, inst.aircraft),
            normalize_time(aircraft.earliest, lo, hi),
            normalize_time(aircraft.latest, lo, hi),
            priority_score(aircraft, inst.aircraft, weights),
            assigned,
        ]
    )


FEATURE_DIM = 9


@dataclass(frozen=True)
class EnvState:
    """Immutable episode state: the instance, the partial schedule, and the
    ids still waiting for a landing time."""

    instance: Instance
    assigned: dict[int, float] = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "assigned", dict(self.assigned))

    @property
    def unassigned(self) -> list[int]:
        return [a.id for a in self.instance.aircraft if a.id not in self.assigned]

    @property
    def done(self) -> bool:
        return len(self.assigned) == self.instance.n

    def assigned_times(self) -> list[float]:
        return sorted(self.assigned.values())


def reset(inst: Instance) -> EnvState:
    """Fresh episode: empty schedule, every aircraft unassigned."""
    return EnvState(instance=inst)


def reward(
    prev: EnvState,
    aircraft_id: int,
    t: float,
    weights: RewardWeights | None = None,
    cost_norm: float | None = None,
) -> float:
    """Shaped step reward for assigning `aircraft_id` to land at `t`.

    Four bounded components: delay (tiered lateness cost scaled by the
    fleet-level normalizer; earliness is free, as in the reported cost
    metric), separation (+1/-1 on constraint validation), throughput (small
    idle gap before this landing), smoothness (change between the two most
    recent landing intervals).
    """
    weights = weights or RewardWeights()
    aircraft = prev.instance.by_id(aircraft_id)
    c_norm = delay_cost_normalizer(prev.instance) if cost_norm is None else cost_norm

    lateness = deviation(t, aircraft.target).lateness
    r_delay = 0.0
    if c_norm > 0:
        r_delay = -min(tiered_delay_cost(lateness, aircraft.cost) / c_norm, 1.0)

    r_sep = 1.0 if validate_separation(t, aircraft_id, prev.assigned, prev.instance) else -1.0

    earlier = [x for x in prev.assigned.values() if x <= t]
    gap = (t - max(earlier)) if earlier else 0.0
    r_thr = float(np.clip(1.0 - gap / 3600.0, -1.0, 1.0))

    r_smooth = 0.0
    if len(earlier) >= 2:
        preds = sorted(earlier)
        current = t - preds[-1]
        previous = preds[-1] - preds[-2]
        r_smooth = float(np.clip(-abs(current - previous) / 600.0, -1.0, 0.0))

    w1, w2, w3, w4 = weights.as_tuple()
    return w1 * r_delay + w2 * r_sep + w3 * r_thr + w4 * r_smooth


def delay_cost_normalizer(inst: Instance) -> float:
    """Tiered cost of a 900 s delay under the per-tier fleet maxima; keeps the
    delay reward roughly -1 at a significant delay on any instance."""
    peak = [max(a.cost.tier_rates[k] for a in inst.aircraft) for k in range(4)]
    return tiered_delay_cost(900.0, CostProfile(*peak))


def state_features(state: EnvState, weights: PriorityWeights) -> np.ndarray:
    """Feature matrix (n x 9) for every aircraft of the state, in instance
    order.  Single pass over the fleet so graph construction stays cheap."""
    inst = state.instance
    lo, hi = horizon(inst)
    fleet = inst.aircraft
    raw = [raw_urgency(a.cost) for a in fleet]
    u_lo, u_hi = min(raw), max(raw)
    peaks = [max(a.cost.tier_rates[k] for a in fleet) for k in range(4)]
    w1, w2, w3, w4 = weights.as_tuple()

    X = np.empty((inst.n, FEATURE_DIM))
    for k, a in enumerate(fleet):
        u = 0.5 if u_hi <= u_lo else (raw[k] - u_lo) / (u_hi - u_lo)
        c_bar = sum(a.cost.tier_rates[i] / peaks[i] for i in range(4) if peaks[i] > 0) / 4.0
        tau = time_criticality(a.earliest, a.latest)
        kappa = category_priority(a.wake)
        p = w1 * u + w2 * tau + w3 * kappa + w4 * c_bar
        assigned = state.assigned.get(a.id)
        X[k, 0] = normalize_time(a.target, lo, hi)
        X[k, 1:4] = 0.0
        X[k, 1 + int(a.wake)] = 1.0
        X[k, 4] = u
        X[k, 5] = normalize_time(a.earliest, lo, hi)
        X[k, 6] = normalize_time(a.latest, lo, hi)
        X[k, 7] = p
        X[k, 8] = UNASSIGNED if assigned is None else normalize_time(assigned, lo, hi)
    return X


def step(
    state: EnvState,
    aircraft_id: int,
    t: float,
    weights: RewardWeights | None = None,
    cost_norm: float | None = None,
) -> tuple[EnvState, float, bool]:
    """Assign a landing time and return (next state, reward, done)."""
    if aircraft_id in state.assigned:
        raise ValueError(f"aircraft {aircraft_id} already assigned")
    aircraft = state.instance.by_id(aircraft_id)
    if not aircraft.earliest <= t <= aircraft.latest:
        raise ValueError(
            f"landing time {t} outside window [{aircraft.earliest}, {aircraft.latest}] "
            f"of aircraft {aircraft_id}"
        )
    r = reward(state, aircraft_id, t, weights, cost_norm)
    assigned = dict(state.assigned)
    assigned[aircraft_id] = float(t)
    nxt = replace(state, assigned=assigned, step_count=state.step_count + 1)
    return nxt, r, nxt.done
