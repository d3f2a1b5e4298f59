"""Graph encoder with actor and critic heads.

The encoder runs two message-passing rounds (pairwise MLP messages folded
into node states by a GRU cell), mixes node states with multi-head scaled
dot-product attention, and finishes with two adjacency-propagation layers.
The actor head maps each node embedding to a landing-time distribution
(mean squashed into the aircraft's window, clamped log-stddev); the critic
head mean-pools the embeddings into a single state value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import FEATURE_DIM
from .graphs import EDGE_DIM, StateGraph
from .nn.autodiff import Tensor, clamp, concat, exp, log, mean, relu, reshape, square, take, tanh, tsum
from .nn.layers import gru_cell, init_uniform, linear, multi_head_attention
from .nn.store import ParameterStore

HIDDEN = 128
HEADS = 4
HEAD_WIDTH = HIDDEN // HEADS
MESSAGE_ROUNDS = 2
ACTOR_FC = 256
LOG_SIGMA_MIN = -10.0
LOG_SIGMA_MAX = 2.0
SIGMA_EPS = 1e-5
#: smooth bound on the raw action mean, mirroring the log-stddev clamp: at
#: +-6 the squashed landing time is already within a few seconds of the
#: window edge, and an unbounded mean turns parameter noise into edge flips
MU_BOUND = 6.0

LOG_2PI = float(np.log(2.0 * np.pi))

#: neighbor aggregation for messages and adjacency propagation: "sum" uses the
#: raw binary adjacency, "mean" normalizes by the neighbor count so the same
#: weights transfer across fleet sizes
AGGREGATIONS = ("sum", "mean")


def init_parameters(seed: int = 0, aggregation: str = "sum") -> ParameterStore:
    """Fresh parameter store for the full network; biases start at zero."""
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
    rng = np.random.default_rng(seed)
    store = ParameterStore()

    def dense(name, fan_in, fan_out, bias=True):
        store.add(f"{name}.w", init_uniform(rng, fan_in, fan_out))
        if bias:
            store.add(f"{name}.b", np.zeros(fan_out))

    dense("embed", FEATURE_DIM, HIDDEN)
    dense("mp.l1", 2 * HIDDEN + EDGE_DIM, HIDDEN)
    dense("mp.l2", HIDDEN, HIDDEN)
    for gate in ("wz", "wr", "wh"):
        store.add(f"gru.{gate}", init_uniform(rng, 2 * HIDDEN, HIDDEN))
    for gate in ("bz", "br", "bh"):
        store.add(f"gru.{gate}", np.zeros(HIDDEN))
    for k in range(HEADS):
        store.add(f"attn.wq{k}", init_uniform(rng, HIDDEN, HEAD_WIDTH))
        store.add(f"attn.wk{k}", init_uniform(rng, HIDDEN, HEAD_WIDTH))
        store.add(f"attn.wv{k}", init_uniform(rng, HIDDEN, HEAD_WIDTH))
    store.add("enc.w1", init_uniform(rng, HIDDEN, HIDDEN))
    store.add("enc.w2", init_uniform(rng, HIDDEN, HIDDEN))
    dense("actor.l1", HIDDEN, ACTOR_FC)
    dense("actor.l2", ACTOR_FC, HIDDEN)
    dense("actor.out", HIDDEN, 2)
    dense("critic.l1", HIDDEN, ACTOR_FC)
    dense("critic.l2", ACTOR_FC, HIDDEN)
    dense("critic.out", HIDDEN, 1)
    store.add("_meta.aggregation", np.array(float(AGGREGATIONS.index(aggregation))))
    return store


def actor_parameter_names(store: ParameterStore) -> list[str]:
    return [name for name in store.names() if name.startswith("actor.")]


@dataclass(frozen=True)
class ActionDistribution:
    """Per-aircraft landing-time distributions for one state."""

    ids: tuple[int, ...]
    mu: np.ndarray        # raw pre-squash means
    sigma: np.ndarray     # post-clamp stddevs, always > 0
    t: np.ndarray         # deterministic squashed landing times
    earliest: np.ndarray
    latest: np.ndarray


def _sigmoid(x):
    # two-branch form avoids exp overflow for large |x|
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def squash_to_window(mu, earliest, latest):
    """Map raw actions through a sigmoid into [earliest, latest]."""
    return earliest + _sigmoid(np.asarray(mu, dtype=float)) * (latest - earliest)


def unsquash(t, earliest, latest):
    """Inverse of `squash_to_window`, clamped away from the boundaries so a
    landing pinned to a window edge keeps a bounded pre-squash value."""
    width = np.maximum(np.asarray(latest, dtype=float) - earliest, 1e-12)
    p = np.clip((np.asarray(t, dtype=float) - earliest) / width, 1e-9, 1.0 - 1e-9)
    return np.clip(np.log(p / (1.0 - p)), -10.0, 10.0)


def sigma_from_log(log_sigma):
    return np.exp(np.clip(log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX)) + SIGMA_EPS


class PolicyNetwork:
    """Actor-critic over state graphs, backed by one parameter store."""

    def __init__(self, store: ParameterStore | None = None, seed: int = 0, aggregation: str = "sum"):
        if store is None:
            store = init_parameters(seed=seed, aggregation=aggregation)
        self.store = store
        code = int(round(float(store["_meta.aggregation"].data))) if "_meta.aggregation" in store else 0
        self.aggregation = AGGREGATIONS[code]
        self._pair_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def with_store(self, store: ParameterStore) -> "PolicyNetwork":
        return PolicyNetwork(store=store)

    # --- encoder ---------------------------------------------------------

    def _pairs(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n not in self._pair_cache:
            src, dst = np.nonzero(~np.eye(n, dtype=bool))
            self._pair_cache[n] = (src, dst)
        return self._pair_cache[n]

    def encode(self, graph: StateGraph) -> Tensor:
        """Per-node embeddings Z (n x 128).

        A single-node graph has no neighbors: its message sum and adjacency
        propagation are zero, but the pipeline still emits a 1 x 128 row.
        """
        store = self.store
        n = graph.n
        h = tanh(linear(Tensor(graph.X), store["embed.w"], store["embed.b"]))

        src, dst = self._pairs(n)
        edge_feats = Tensor(graph.E[src, dst])
        gru_weights = {k: store[f"gru.{k}"] for k in ("wz", "wr", "wh", "bz", "br", "bh")}
        for _ in range(MESSAGE_ROUNDS):
            pair_in = concat([take(h, src), take(h, dst), edge_feats], axis=1)
            msg = linear(
                relu(linear(pair_in, store["mp.l1.w"], store["mp.l1.b"])),
                store["mp.l2.w"],
                store["mp.l2.b"],
            )
            agg = tsum(reshape(msg, (n, max(n - 1, 0), HIDDEN)), axis=1)
            if self.aggregation == "mean" and n > 1:
                agg = agg * (1.0 / (n - 1))
            h = gru_cell(h, agg, gru_weights)

        attn_weights = {name: store[f"attn.{name}"] for name in
                        (f"w{p}{k}" for p in "qkv" for k in range(HEADS))}
        mixed = multi_head_attention(h, attn_weights, HEADS, mask=graph.A > 0)

        adjacency = graph.A if self.aggregation == "sum" else graph.A / max(n - 1, 1)
        a = Tensor(adjacency)
        h1 = relu(a @ (mixed @ store["enc.w1"]))
        h2 = relu(a @ (h1 @ store["enc.w2"]))
        return h2

    # --- actor -----------------------------------------------------------

    def actor_outputs(self, z: Tensor) -> tuple[Tensor, Tensor]:
        """Raw action mean and clamped stddev tensors, one row per aircraft."""
        store = self.store
        a = relu(linear(z, store["actor.l1.w"], store["actor.l1.b"]))
        a = relu(linear(a, store["actor.l2.w"], store["actor.l2.b"]))
        out = linear(a, store["actor.out.w"], store["actor.out.b"])
        mu = tanh(take(out, (slice(None), 0)) * (1.0 / MU_BOUND)) * MU_BOUND
        log_sigma = take(out, (slice(None), 1))
        sigma = exp(clamp(log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX)) + SIGMA_EPS
        return mu, sigma

    def distributions_for(self, graph: StateGraph, windows: dict[int, tuple[float, float]]) -> ActionDistribution:
        """Distributions with deterministic times mapped into real windows."""
        z = self.encode(graph)
        mu, sigma = self.actor_outputs(z)
        earliest = np.array([windows[i][0] for i in graph.ids])
        latest = np.array([windows[i][1] for i in graph.ids])
        t = squash_to_window(mu.data, earliest, latest)
        return ActionDistribution(graph.ids, mu.data.copy(), sigma.data.copy(), t, earliest, latest)

    # --- critic ----------------------------------------------------------

    def value_tensor(self, z: Tensor) -> Tensor:
        store = self.store
        pooled = reshape(mean(z, axis=0), (1, HIDDEN))
        c = relu(linear(pooled, store["critic.l1.w"], store["critic.l1.b"]))
        c = relu(linear(c, store["critic.l2.w"], store["critic.l2.b"]))
        v = linear(c, store["critic.out.w"], store["critic.out.b"])
        return take(v, (0, 0))

    def value(self, graph: StateGraph) -> float:
        return float(self.value_tensor(self.encode(graph)).data)

    # --- density helpers for the losses -----------------------------------

    def log_prob_entropy(self, z: Tensor, row: int, action_u: float) -> tuple[Tensor, Tensor, Tensor]:
        """Gaussian log-density of a stored pre-squash action, the closed-form
        entropy 0.5*log(2*pi*e*sigma^2), and the row's raw mean, as scalar
        tensors."""
        mu_all, sigma_all = self.actor_outputs(z)
        mu = take(mu_all, row)
        sigma = take(sigma_all, row)
        diff = (Tensor(float(action_u)) - mu) / sigma
        log_prob = -0.5 * square(diff) - log(sigma) - 0.5 * LOG_2PI
        entropy = log(sigma) + 0.5 * (LOG_2PI + 1.0)
        return log_prob, entropy, mu


def act(mu: float, earliest: float, latest: float) -> float:
    """Deterministic landing time for a raw actor mean."""
    if latest < earliest:
        raise ValueError("window must satisfy L >= E")
    return float(squash_to_window(mu, earliest, latest))


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> np.ndarray:
    """Draw pre-squash means, map into each window, clamp to the bounds."""
    draw = rng.normal(dist.mu, dist.sigma)
    t = squash_to_window(draw, dist.earliest, dist.latest)
    return np.clip(t, dist.earliest, dist.latest)
