import numpy as np
import pytest

from alpsched.core import Schedule, WakeClass, validate_schedule
from alpsched.env import reset, step
from alpsched.safety import (
    AssignmentConfig,
    InfeasibleInstanceError,
    adjust_landing_time,
    assign_all,
    validate_separation,
)

from conftest import make_instance, plane, random_instance

H, M, L = WakeClass.HEAVY, WakeClass.MEDIUM, WakeClass.LIGHT


# --- validate_separation --------------------------------------------------------

def test_empty_schedule_in_window_is_valid():
    inst = make_instance([plane(1, H, 1000)])
    assert validate_separation(1000.0, 1, {}, inst)
    assert not validate_separation(1901.0, 1, {}, inst)


def test_heavy_then_light_needs_270():
    inst = make_instance([plane(1, H, 0), plane(2, L, 100)])
    assert not validate_separation(100.0, 2, {1: 0.0}, inst)
    assert validate_separation(270.0, 2, {1: 0.0}, inst)  # boundary allowed


def test_light_then_heavy_needs_90():
    inst = make_instance([plane(1, L, 0), plane(2, H, 95)])
    assert validate_separation(95.0, 2, {1: 0.0}, inst)
    assert not validate_separation(89.0, 2, {1: 0.0}, inst)


def test_precedence_respected():
    inst = make_instance([plane(1, M, 1000), plane(2, M, 2000)], precedence=[(1, 2)])
    # aircraft 1 must land before 2
    assert not validate_separation(2500.0, 1, {2: 2000.0}, inst)
    assert validate_separation(1000.0, 1, {2: 2000.0}, inst)
    assert not validate_separation(900.0, 2, {1: 1000.0}, inst)


# --- adjust_landing_time ----------------------------------------------------------

def test_adjust_conflict_free_unchanged():
    inst = make_instance([plane(1, H, 1000), plane(2, H, 2000)])
    assert adjust_landing_time(2000.0, 2, {1: 1000.0}, inst) == 2000.0


def test_adjust_forward_to_separation_edge():
    inst = make_instance([plane(1, H, 0), plane(2, H, 50)])
    # heavy behind heavy: pushed to 96 + 30
    assert adjust_landing_time(50.0, 2, {1: 0.0}, inst) == pytest.approx(126.0)


def test_adjust_prefers_forward_then_backward():
    # forward blocked by the window end, backward feasible
    inst = make_instance([plane(1, H, 1000), plane(2, H, 1000, earliest=0, latest=1050)])
    t = adjust_landing_time(1040.0, 2, {1: 1000.0}, inst)
    assert t == pytest.approx(1000.0 - 126.0)


def test_adjust_fully_blocked_returns_input():
    inst = make_instance([plane(1, H, 1000), plane(2, H, 1000, earliest=950, latest=1050)])
    assert adjust_landing_time(1000.0, 2, {1: 1000.0}, inst) == 1000.0


def test_adjust_hops_over_cluster():
    inst = make_instance(
        [plane(k, H, 1000, earliest=0, latest=9000) for k in (1, 2, 3)]
    )
    assigned = {1: 1000.0, 2: 1126.0}
    t = adjust_landing_time(1001.0, 3, assigned, inst)
    assert t == pytest.approx(1252.0)
    assert validate_separation(t, 3, assigned, inst)


# --- assign_all --------------------------------------------------------------------

def test_single_in_window_proposal_kept():
    inst = make_instance([plane(1, H, 1000)])
    schedule = assign_all({1: 1234.0}, inst)
    assert schedule.time_of(1) == 1234.0


def test_identical_proposals_separated():
    inst = make_instance([plane(1, H, 5000), plane(2, H, 5000)])
    schedule = assign_all({1: 5000.0, 2: 5000.0}, inst)
    gap = abs(schedule.time_of(1) - schedule.time_of(2))
    assert gap >= 96 + 30
    assert validate_schedule(inst, schedule).feasible


def test_feasible_proposals_returned_unchanged(rng):
    for _ in range(30):
        inst = random_instance(rng, n=int(rng.integers(2, 8)), mean_gap=500.0)
        proposals = {a.id: a.target for a in inst.aircraft}
        base = Schedule(proposals)
        if not validate_schedule(inst, base).feasible:
            continue
        out = assign_all(proposals, inst)
        assert out.times == pytest.approx(proposals)


def test_adversarial_cluster_zero_violations():
    planes = [plane(k, (H, M, L, M, H)[k - 1], 5000 + 10 * (k - 1), earliest=4000, latest=12000)
              for k in range(1, 6)]
    inst = make_instance(planes)
    proposals = {k: 5000.0 + 10 * (k - 1) for k in range(1, 6)}
    schedule = assign_all(proposals, inst)
    assert validate_schedule(inst, schedule).feasible


def test_assign_all_deterministic(rng):
    inst = random_instance(rng, n=8, mean_gap=60.0)
    proposals = {a.id: float(rng.uniform(a.earliest, a.latest)) for a in inst.aircraft}
    a = assign_all(proposals, inst)
    b = assign_all(proposals, inst)
    assert a.times == b.times


def test_assign_all_on_partial_state():
    inst = make_instance([plane(1, H, 1000), plane(2, H, 1100)])
    state = reset(inst)
    state, _, _ = step(state, 1, 1000.0)
    schedule = assign_all({2: 1010.0}, state)
    assert schedule.time_of(1) == 1000.0
    assert schedule.time_of(2) >= 1126.0
    with pytest.raises(ValueError):
        assign_all({1: 1000.0}, state)  # already assigned


def test_assign_all_respects_precedence():
    inst = make_instance(
        [plane(1, M, 5000, earliest=0, latest=20000), plane(2, M, 4000, earliest=0, latest=20000)],
        precedence=[(1, 2)],
    )
    schedule = assign_all({1: 5000.0, 2: 4000.0}, inst)
    assert schedule.time_of(1) < schedule.time_of(2)
    assert validate_schedule(inst, schedule).feasible


def test_recovery_unblocks_via_removal():
    # aircraft 3's tiny window is blocked by 2's slot; recovery must move 2
    inst = make_instance(
        [
            plane(1, M, 1000, earliest=0, latest=30000, cost=(9, 9, 9, 9)),
            plane(2, M, 1200, earliest=0, latest=30000, cost=(5, 5, 5, 5)),
            plane(3, M, 1200, earliest=1150, latest=1250, cost=(1, 1, 1, 1)),
        ]
    )
    schedule = assign_all({1: 1000.0, 2: 1200.0, 3: 1200.0}, inst)
    assert validate_schedule(inst, schedule).feasible
    assert 1150.0 <= schedule.time_of(3) <= 1250.0


def test_backtrack_budget_exhaustion():
    # two aircraft pinned to the same instant: physically infeasible
    inst = make_instance(
        [
            plane(1, M, 1000, earliest=1000, latest=1000),
            plane(2, M, 1000, earliest=1000, latest=1000),
        ]
    )
    with pytest.raises(InfeasibleInstanceError):
        assign_all({1: 1000.0, 2: 1000.0}, inst)


def test_zero_backtracks_mode_raises_fast():
    inst = make_instance(
        [
            plane(1, M, 1000, earliest=1000, latest=1000),
            plane(2, M, 1000, earliest=1000, latest=1000),
        ]
    )
    cfg = AssignmentConfig(max_backtracks=0)
    with pytest.raises(InfeasibleInstanceError):
        assign_all({1: 1000.0, 2: 1000.0}, inst, cfg)


def test_hard_guarantee_random_instances(rng):
    """Feasible output or an explicit error, across random proposal stress."""
    infeasible = 0
    for k in range(300):
        inst = random_instance(rng, n=int(rng.integers(1, 31)), mean_gap=90.0,
                               window_after=8000.0)
        proposals = {a.id: float(rng.uniform(a.earliest, a.latest)) for a in inst.aircraft}
        try:
            schedule = assign_all(proposals, inst)
        except InfeasibleInstanceError:
            infeasible += 1
            continue
        assert validate_schedule(inst, schedule).feasible
    assert infeasible == 0  # wide windows: recovery always succeeds


def test_earliest_forward_preference(rng):
    """Adjustment never lands earlier than the proposal when a forward slot
    exists inside the window."""
    for _ in range(100):
        inst = random_instance(rng, n=5, mean_gap=100.0, window_after=8000.0)
        assigned = {}
        for a in inst.aircraft:
            proposal = float(rng.uniform(a.earliest, a.latest - 2000))
            t = adjust_landing_time(proposal, a.id, assigned, inst)
            if t >= proposal:
                assert validate_separation(t, a.id, assigned, inst)
            assigned[a.id] = t
