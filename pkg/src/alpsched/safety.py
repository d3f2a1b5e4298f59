"""Safety layer: turn raw landing-time proposals into a feasible schedule.

Aircraft are processed in descending priority order.  Each proposal is
validated against the partial schedule (separation + buffer, window,
precedence); an invalid time is adjusted to the nearest feasible point
(forward first, then backward).  When an aircraft's window is fully blocked,
a bounded backtracking recovery unassigns the most recent blocker and
re-places both.  Schedules returned by `assign_all` always validate clean or
the call raises `InfeasibleInstanceError`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .core import Instance, Schedule, validate_schedule


class InfeasibleInstanceError(RuntimeError):
    """The recovery budget ran out before a feasible assignment was found."""


@dataclass(frozen=True)
class AssignmentConfig:
    """Knobs of the assignment pass.

    `max_backtracks` defaults to twice the number of aircraft being placed
    (resolved at call time when None).
    """

    max_attempts: int = 7
    max_backtracks: int | None = None

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def validate_separation(t: float, aircraft_id: int, assigned: dict[int, float], inst: Instance) -> bool:
    """True iff landing `aircraft_id` at `t` respects its window, buffered
    separation against every assigned aircraft (earlier lander leads), and
    the precedence pairs whose partner is already assigned."""
    a = inst.by_id(aircraft_id)
    if not a.earliest <= t <= a.latest:
        return False
    for jid, xj in assigned.items():
        if jid == aircraft_id:
            continue
        if (xj, jid) < (t, aircraft_id):
            lead, follow = jid, aircraft_id
        else:
            lead, follow = aircraft_id, jid
        if abs(t - xj) < inst.separation_between(lead, follow) + inst.buffer_s:
            return False
    for i, j in inst.precedence:
        if i == aircraft_id and j in assigned and t >= assigned[j]:
            return False
        if j == aircraft_id and i in assigned and assigned[i] >= t:
            return False
    return True


def _blocked_intervals(aircraft_id: int, assigned: dict[int, float], inst: Instance) -> list[tuple[float, float]]:
    """Open intervals of landing times that conflict with assigned aircraft.

    A feasible t must sit left of x_j by at least sep(candidate->j)+b or right
    by sep(j->candidate)+b; precedence turns the forbidden side unbounded.
    """
    out = []
    for jid, xj in assigned.items():
        if jid == aircraft_id:
            continue
        left = xj - inst.separation_between(aircraft_id, jid) - inst.buffer_s
        right = xj + inst.separation_between(jid, aircraft_id) + inst.buffer_s
        if inst.must_precede(aircraft_id, jid):
            right = float("inf")
        if inst.must_precede(jid, aircraft_id):
            left = float("-inf")
        out.append((left, right))
    out.sort()
    merged: list[tuple[float, float]] = []
    for a, b in out:
        if merged and a < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def adjust_landing_time(t: float, aircraft_id: int, assigned: dict[int, float], inst: Instance) -> float:
    """Nearest feasible landing time: the earliest feasible point >= t, else
    the latest feasible point <= t, clamped to the window.  Returns t
    unchanged when the whole window is blocked (the caller counts the failed
    attempt)."""
    a = inst.by_id(aircraft_id)
    lo, hi = a.earliest, a.latest
    blocked = _blocked_intervals(aircraft_id, assigned, inst)

    forward = min(max(t, lo), hi)
    for left, right in blocked:
        if left < forward < right:
            forward = right
    if lo <= forward <= hi:
        return forward

    backward = min(max(t, lo), hi)
    for left, right in reversed(blocked):
        if left < backward < right:
            backward = left
    if lo <= backward <= hi:
        return backward
    return t


def _unpack_state(state) -> tuple[Instance, dict[int, float]]:
    if isinstance(state, Instance):
        return state, {}
    return state.instance, dict(state.assigned)


def _priority_rank(inst: Instance, ids, priority_weights) -> dict[int, int]:
    from .env import PriorityWeights, priority_score  # local import: env depends on this module

    weights = priority_weights or PriorityWeights()
    scored = sorted(
        ((priority_score(inst.by_id(i), inst.aircraft, weights), i) for i in ids),
        key=lambda t: (-t[0], t[1]),
    )
    return {aid: rank for rank, (_, aid) in enumerate(scored)}


def assign_all(
    proposals: dict[int, float],
    state,
    cfg: AssignmentConfig | None = None,
    priority_weights=None,
) -> Schedule:
    """Assign every proposed aircraft a feasible landing time.

    `state` is either an Instance (nothing assigned yet) or an environment
    state carrying a partial schedule; exactly the unassigned aircraft must be
    proposed when a partial schedule exists.  Raises
    `InfeasibleInstanceError` when the backtracking budget is exhausted.
    """
    cfg = cfg or AssignmentConfig()
    inst, working = _unpack_state(state)
    for aid in proposals:
        if aid in working:
            raise ValueError(f"aircraft {aid} is already assigned")
        inst.by_id(aid)

    rank = _priority_rank(inst, proposals, priority_weights)
    order = sorted(proposals, key=rank.__getitem__)
    budget = cfg.max_backtracks if cfg.max_backtracks is not None else 2 * len(proposals)
    stack: list[int] = []  # this pass's assignments, oldest first
    pending = deque(order)

    while pending:
        aid = pending.popleft()
        a = inst.by_id(aid)
        t = min(max(proposals.get(aid, a.earliest), a.earliest), a.latest)
        placed = False
        for _ in range(cfg.max_attempts):
            if validate_separation(t, aid, working, inst):
                working[aid] = t
                stack.append(aid)
                placed = True
                break
            t = adjust_landing_time(t, aid, working, inst)
        while not placed:
            if budget <= 0:
                raise InfeasibleInstanceError(
                    f"no feasible landing time for aircraft {aid} within the backtrack budget"
                )
            budget -= 1
            blocker = _find_unblocking_removal(aid, working, stack, inst)
            if blocker is None:
                continue  # nothing removable helps; the budget drains to an error
            del working[blocker]
            stack.remove(blocker)
            first, second = sorted((aid, blocker), key=rank.__getitem__)
            if not _place_earliest(first, working, stack, inst):
                pending.appendleft(second)
                aid = first
                continue
            if _place_earliest(second, working, stack, inst):
                placed = True
            else:
                aid = second

    schedule = Schedule(working)
    if len(working) == inst.n:
        report = validate_schedule(inst, schedule)
        if not report.feasible:
            raise InfeasibleInstanceError(
                f"assignment produced {report.count()} violations: {report.violations[0]}"
            )
    return schedule


def _place_earliest(aircraft_id: int, working: dict[int, float], stack: list[int], inst: Instance) -> bool:
    t = adjust_landing_time(inst.by_id(aircraft_id).earliest, aircraft_id, working, inst)
    if validate_separation(t, aircraft_id, working, inst):
        working[aircraft_id] = t
        stack.append(aircraft_id)
        return True
    return False


def _find_unblocking_removal(failed_id, working, stack, inst) -> int | None:
    """Newest assigned aircraft whose removal opens a feasible time for
    `failed_id`, or None when no single removal helps."""
    for candidate in reversed(stack):
        trial = {k: v for k, v in working.items() if k != candidate}
        t = adjust_landing_time(inst.by_id(failed_id).earliest, failed_id, trial, inst)
        if validate_separation(t, failed_id, trial, inst):
            return candidate
    return None
