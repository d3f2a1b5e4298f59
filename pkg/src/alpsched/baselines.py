"""Reference schedulers: first-come-first-serve, tabu search, and an exact
small-instance oracle.

All three share the same sequence-timing rule: given a landing order, each
aircraft lands at the earliest time that clears its window and the buffered
separation against every predecessor.  FCFS additionally floors its first
aircraft at the target time (the operational zero-cost point); the oracle and
tabu search time sequences purely earliest-feasible, which is per-sequence
optimal whenever per-aircraft costs are nondecreasing in the landing time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import Instance, Schedule, tiered_delay_cost

#: hard size limits for the exact oracle
ORACLE_MAX_N = 10
ORACLE_FALLBACK_MAX_N = 8
ORACLE_CPS_MAX_N = 30


class OracleLimitError(ValueError):
    """Instance violates the oracle's size or cost-shape preconditions."""


def _arrays(inst: Instance):
    E = np.array([a.earliest for a in inst.aircraft])
    T = np.array([a.target for a in inst.aircraft])
    L = np.array([a.latest for a in inst.aircraft])
    sep = inst.separation_array()
    return E, T, L, sep


def time_sequence(inst: Instance, order: list[int], floor_first_at_target: bool = False) -> Schedule:
    """Earliest-feasible forward timing of a landing order.

    Each aircraft is pushed past *every* predecessor by the buffered
    separation (not just the immediate one, so irregular pairwise matrices
    stay feasible) and clamped into its window; a clamp at the latest time
    shows up as a separation violation in validation rather than being hidden.
    """
    E, T, L, sep = _arrays(inst)
    b = inst.buffer_s
    idx = [inst.index_of(aid) for aid in order]
    times = np.empty(len(idx))
    for pos, k in enumerate(idx):
        t = E[k]
        if pos == 0 and floor_first_at_target:
            t = max(t, T[k])
        if pos > 0:
            prev = idx[:pos]
            t = max(t, float((times[:pos] + sep[prev, k]).max()) + b)
        times[pos] = min(t, L[k])
    return Schedule({order[pos]: float(times[pos]) for pos in range(len(order))})


def _sequence_cost(inst: Instance, order_idx: list[int], E, T, L, sep) -> float:
    """Cost of the earliest-feasible timing of `order_idx` (by position), or
    +inf when the order cannot fit inside the windows."""
    b = inst.buffer_s
    total = 0.0
    times = np.empty(len(order_idx))
    for pos, k in enumerate(order_idx):
        t = E[k]
        if pos > 0:
            prev = order_idx[:pos]
            t = max(t, float((times[:pos] + sep[prev, k]).max()) + b)
        if t > L[k]:
            return float("inf")
        times[pos] = t
        if t > T[k]:
            total += tiered_delay_cost(t - T[k], inst.aircraft[k].cost)
        else:
            total += inst.aircraft[k].cost.early * (T[k] - t)
    return total


def fcfs_order(inst: Instance) -> list[int]:
    """Ids by actual arrival time (radar entry), ties broken by id."""
    return [a.id for a in sorted(inst.aircraft, key=lambda a: (a.ata, a.id))]


def fcfs(inst: Instance) -> Schedule:
    """First-come-first-serve: arrival order, first aircraft at its target,
    the rest at the earliest separable time (targets not enforced)."""
    return time_sequence(inst, fcfs_order(inst), floor_first_at_target=True)


# --- tabu search -------------------------------------------------------------

@dataclass(frozen=True)
class TabuConfig:
    """Tabu-search knobs.  The neighborhood is the set of adjacent
    transpositions (a one-position shift and an adjacent swap coincide), the
    tabu list forbids re-swapping a pair for `tenure` iterations, and
    aspiration overrides the list when a move beats the incumbent.  The
    search itself is deterministic; `seed` is kept for randomized variants."""

    tenure: int = 7
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.tenure < 1:
            raise ValueError("tenure must be >= 1")


def _topo_by(inst: Instance, order: list[int]) -> list[int]:
    """Stable topological patch of `order` respecting precedence pairs."""
    if not inst.precedence:
        return order
    rank = {aid: pos for pos, aid in enumerate(order)}
    succ: dict[int, list[int]] = {}
    indeg = {aid: 0 for aid in order}
    for i, j in inst.precedence:
        succ.setdefault(i, []).append(j)
        indeg[j] += 1
    ready = sorted((aid for aid in order if indeg[aid] == 0), key=rank.__getitem__)
    out = []
    while ready:
        aid = ready.pop(0)
        out.append(aid)
        for nxt in succ.get(aid, ()):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort(key=rank.__getitem__)
    return out


def _respects_precedence(inst: Instance, order: list[int]) -> bool:
    pos = {aid: p for p, aid in enumerate(order)}
    return all(pos[i] < pos[j] for i, j in inst.precedence)


def tabu_search(inst: Instance, cfg: TabuConfig | None = None) -> Schedule:
    """Local search over landing orders starting from the FCFS incumbent.

    The returned cost never exceeds the FCFS cost: the initial incumbent is
    the FCFS order (earliest-feasible timed) and the incumbent only improves.
    """
    cfg = cfg or TabuConfig()
    E, T, L, sep = _arrays(inst)
    order = _topo_by(inst, fcfs_order(inst))
    idx_of = {aid: inst.index_of(aid) for aid in order}

    def cost_of(seq: list[int]) -> float:
        if not _respects_precedence(inst, seq):
            return float("inf")
        return _sequence_cost(inst, [idx_of[aid] for aid in seq], E, T, L, sep)

    current = list(order)
    current_cost = cost_of(current)
    best, best_cost = list(current), current_cost
    tabu_until: dict[tuple[int, int], int] = {}

    n = len(order)
    for iteration in range(cfg.max_iterations):
        chosen = None
        chosen_cost = float("inf")
        chosen_pair = None
        for pos in range(n - 1):
            cand = list(current)
            cand[pos], cand[pos + 1] = cand[pos + 1], cand[pos]
            pair = (min(cand[pos], cand[pos + 1]), max(cand[pos], cand[pos + 1]))
            cand_cost = cost_of(cand)
            is_tabu = tabu_until.get(pair, -1) >= iteration
            if is_tabu and not cand_cost < best_cost:
                continue
            if cand_cost < chosen_cost:
                chosen, chosen_cost, chosen_pair = cand, cand_cost, pair
        if chosen is None:
            break  # every move tabu and none aspirates
        current, current_cost = chosen, chosen_cost
        tabu_until[chosen_pair] = iteration + cfg.tenure
        if current_cost < best_cost:
            best, best_cost = list(current), current_cost

    return time_sequence(inst, best)


# --- exact oracle ------------------------------------------------------------

def _reject_earliness_costs(inst: Instance) -> None:
    if any(a.cost.early > 0 for a in inst.aircraft):
        raise OracleLimitError(
            "oracle requires delay-monotone costs; earliness-penalty profiles are not supported"
        )


def _chain_dominates(sep: np.ndarray, buffer_s: float) -> bool:
    """True when satisfying the immediate predecessor implies satisfying all
    earlier aircraft: s[a,c] <= s[a,m] + s[m,c] + b for every triple."""
    n = sep.shape[0]
    via = sep[:, :, None] + sep[None, :, :] + buffer_s  # [a, m, c]
    direct = sep[:, None, :]
    ok = via >= direct
    mask = np.ones_like(ok)
    r = np.arange(n)
    mask[r, r, :] = False
    mask[r, :, r] = False
    mask[:, r, r] = False
    return bool(np.all(ok | ~mask))


def exact_oracle(inst: Instance, cps: int | None = None) -> Schedule:
    """Minimum-cost schedule over all landing orders respecting precedence,
    each order timed earliest-feasible.

    Valid for delay-monotone costs only: with costs nondecreasing in the
    landing time, the earliest-feasible timing of an order dominates every
    feasible schedule with that order, so the best order is a global optimum.

    `cps` restricts each aircraft to within `cps` positions of its
    first-come order (constrained position shifting), which extends the
    reachable size from 10 to 30 aircraft.
    """
    _reject_earliness_costs(inst)
    n = inst.n
    E, T, L, sep = _arrays(inst)
    if cps is not None:
        if cps < 1:
            raise OracleLimitError("cps must be >= 1")
        if n > ORACLE_CPS_MAX_N:
            raise OracleLimitError(f"cps oracle supports n <= {ORACLE_CPS_MAX_N}, got {n}")
    elif n > ORACLE_MAX_N:
        raise OracleLimitError(f"oracle supports n <= {ORACLE_MAX_N}, got {n}")

    if _chain_dominates(sep, inst.buffer_s):
        order = _oracle_dp(inst, E, T, L, sep, cps)
    else:
        # irregular pairwise matrices break the predecessor-dominance the DP
        # relies on; fall back to explicit enumeration
        if cps is not None:
            raise OracleLimitError("cps oracle requires a chain-dominant separation matrix")
        if n > ORACLE_FALLBACK_MAX_N:
            raise OracleLimitError(
                f"this separation matrix needs exhaustive enumeration (n <= {ORACLE_FALLBACK_MAX_N})"
            )
        order = _oracle_enumerate(inst, E, T, L, sep)
    return time_sequence(inst, order)


def _precedence_masks(inst: Instance) -> list[int]:
    """pred_mask[k] = bitmask of aircraft that must land before position-index k."""
    masks = [0] * inst.n
    for i, j in inst.precedence:
        masks[inst.index_of(j)] |= 1 << inst.index_of(i)
    return masks


def _oracle_enumerate(inst: Instance, E, T, L, sep) -> list[int]:
    n = inst.n
    pred = _precedence_masks(inst)
    best_cost = float("inf")
    best_order = None
    for perm in itertools.permutations(range(n)):
        seen = 0
        ok = True
        for k in perm:
            if pred[k] & ~seen:
                ok = False
                break
            seen |= 1 << k
        if not ok:
            continue
        cost = _sequence_cost(inst, list(perm), E, T, L, sep)
        if cost < best_cost or (cost == best_cost and best_order is not None and list(perm) < best_order):
            best_cost = cost
            best_order = list(perm)
    if best_order is None:
        raise InfeasibleOracleError("no order fits inside the landing windows")
    return [inst.aircraft[k].id for k in best_order]


class InfeasibleOracleError(RuntimeError):
    """No permutation admits a window-feasible earliest-forward timing."""


def _oracle_dp(inst: Instance, E, T, L, sep, cps: int | None) -> list[int]:
    """Subset DP over (placed set, last aircraft) with Pareto frontiers of
    (last landing time, accumulated cost); exact under chain dominance."""
    n = inst.n
    b = inst.buffer_s
    pred = _precedence_masks(inst)
    fcfs_pos = {aid: pos for pos, aid in enumerate(fcfs_order(inst))}
    cps_pos = [fcfs_pos[a.id] for a in inst.aircraft]

    def allowed(k: int, position: int) -> bool:
        return cps is None or abs(cps_pos[k] - position) <= cps

    def tier_cost(k: int, t: float) -> float:
        return tiered_delay_cost(t - T[k], inst.aircraft[k].cost) if t > T[k] else 0.0

    # frontier entries: (time, cost, parent_state, parent_entry_index)
    frontiers: dict[tuple[int, int], list[tuple]] = {}
    for k in range(n):
        if pred[k] or not allowed(k, 0):
            continue
        frontiers[(1 << k, k)] = [(float(E[k]), tier_cost(k, float(E[k])), None, None)]

    def push(state, entry):
        frontier = frontiers.setdefault(state, [])
        t_new, c_new = entry[0], entry[1]
        for t_old, c_old, _, _ in frontier:
            if t_old <= t_new and c_old <= c_new:
                return
        frontier[:] = [e for e in frontier if not (t_new <= e[0] and c_new <= e[1])]
        frontier.append(entry)

    # sweep by position so every state at position p is final before expanding
    states_by_pos: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
    for state in frontiers:
        states_by_pos[1].append(state)
    for position in range(1, n):
        for state in states_by_pos[position]:
            mask, last = state
            for k in range(n):
                if mask & (1 << k) or not allowed(k, position):
                    continue
                if pred[k] & ~mask:
                    continue
                new_state = (mask | (1 << k), k)
                fresh = new_state not in frontiers
                for entry_idx, (t_last, cost, _, _) in enumerate(list(frontiers[state])):
                    t = max(float(E[k]), t_last + float(sep[last, k]) + b)
                    if t > L[k]:
                        continue
                    push(new_state, (t, cost + tier_cost(k, t), state, entry_idx))
                if fresh and new_state in frontiers:
                    states_by_pos[position + 1].append(new_state)

    full = (1 << n) - 1
    best = None
    for (mask, last), frontier in frontiers.items():
        if mask != full:
            continue
        for entry_idx, (t, cost, _, _) in enumerate(frontier):
            key = (cost, t, last)
            if best is None or key < best[0]:
                best = (key, (mask, last), entry_idx)
    if best is None:
        raise InfeasibleOracleError("no order fits inside the landing windows")

    order_idx = []
    state, entry_idx = best[1], best[2]
    while state is not None:
        order_idx.append(state[1])
        entry = frontiers[state][entry_idx]
        state, entry_idx = entry[2], entry[3]
    order_idx.reverse()
    return [inst.aircraft[k].id for k in order_idx]
