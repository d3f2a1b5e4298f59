"""Directed fully connected state graph over the aircraft of an episode.

Nodes carry the 9-channel feature rows from the environment; every ordered
pair (i, j), i != j, gets an edge with five features describing how well j
can follow i: normalized required separation, normalized time difference,
both priority scores, and a combined feasibility weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import CRITICALITY_SPAN_S, EnvState, PriorityWeights, state_features

#: Largest class separation (Heavy -> Light); normalizes the separation channel.
MAX_CLASS_SEPARATION_S = 240.0

EDGE_DIM = 5


@dataclass(frozen=True)
class StateGraph:
    """Node features X (n x 9), binary adjacency A (n x n, zero diagonal), and
    edge feature tensor E (n x n x 5); `ids` maps row index to aircraft id."""

    ids: tuple[int, ...]
    X: np.ndarray
    A: np.ndarray
    E: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def edge_count(self) -> int:
        return int(self.A.sum())


def edge_weight(separation_s: float, dt_s: float, p_lead: float, p_follow: float) -> float:
    """Feasibility of one aircraft following another: the product of a
    separation-slack gate min(|dt|/s, 1), a time-proximity decay
    exp(-|dt|/1500), and a follower-priority factor (1 + p_follow)/2."""
    if separation_s <= 0:
        raise ValueError("separation must be > 0")
    gap = abs(dt_s)
    g_sep = min(gap / separation_s, 1.0)
    g_time = np.exp(-gap / CRITICALITY_SPAN_S)
    g_prio = (1.0 + p_follow) / 2.0
    return float(g_sep * g_time * g_prio)


def build_graph(state: EnvState, weights: PriorityWeights | None = None) -> StateGraph:
    """Construct the state graph for the current episode state.

    Time differences use target times until both endpoints have assigned
    landing times, then the assigned times.
    """
    weights = weights or PriorityWeights()
    inst = state.instance
    n = inst.n
    X = state_features(state, weights)

    A = np.ones((n, n)) - np.eye(n)

    times = np.array([state.assigned.get(a.id, a.target) for a in inst.aircraft])
    has_time = np.array([a.id in state.assigned for a in inst.aircraft])
    targets = np.array([a.target for a in inst.aircraft])
    both = np.logical_and.outer(has_time, has_time)
    dt = np.where(both, times[None, :] - times[:, None], targets[None, :] - targets[:, None])

    sep = inst.separation_array()
    gap = np.abs(dt)
    prio = X[:, 7]
    with np.errstate(divide="ignore", invalid="ignore"):
        g_sep = np.where(sep > 0, np.minimum(gap / np.where(sep > 0, sep, 1.0), 1.0), 0.0)
    weights_ij = g_sep * np.exp(-gap / CRITICALITY_SPAN_S) * (1.0 + prio[None, :]) / 2.0

    E = np.zeros((n, n, EDGE_DIM))
    E[:, :, 0] = sep / MAX_CLASS_SEPARATION_S
    E[:, :, 1] = np.minimum(gap / CRITICALITY_SPAN_S, 1.0)
    E[:, :, 2] = prio[:, None]
    E[:, :, 3] = prio[None, :]
    E[:, :, 4] = weights_ij
    mask = A[:, :, None]
    E *= mask

    return StateGraph(ids=tuple(a.id for a in inst.aircraft), X=X, A=A, E=E)
