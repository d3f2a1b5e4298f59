"""The learning loop: exploration schedules, parameter noise, one-step
advantages, actor/critic losses, and the per-episode update.

One decision per step assigns one aircraft (always the highest-priority
unassigned one); its proposed time is run through the safety layer in
adjust-only mode before the environment step, so training transitions stay
feasible and a fully blocked window aborts the episode instead of corrupting
it.  Exploration combines an epsilon-greedy uniform draw over the window
with Gaussian parameter noise on the actor head, the noise scale adapting
toward a target action deviation.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Instance, Schedule, total_cost, deviation
from .dataio import ScenarioSpec, synthesize
from .env import (
    EnvState,
    PriorityWeights,
    RewardWeights,
    delay_cost_normalizer,
    priority_order,
    reset,
    step,
)
from .graphs import build_graph
from .nn.autodiff import backward
from .nn.optim import AdamConfig, adam_step
from .nn.store import ParameterStore, load_checkpoint, save_checkpoint
from .policy import PolicyNetwork, actor_parameter_names, squash_to_window, unsquash
from .safety import AssignmentConfig, InfeasibleInstanceError, assign_all


@dataclass(frozen=True)
class TrainConfig:
    episodes_per_scenario: int = 10_000
    scenario_sizes: tuple[int, ...] = (5, 10, 20, 30)
    gamma: float = 0.99
    entropy_coeff: float = 0.02
    lr_start: float = 1e-4
    lr_end: float = 1e-5
    epsilon_start: float = 0.9
    epsilon_end: float = 0.3
    tau: float | None = None  # None: total episodes / 3
    plateau_window: int = 500
    noise_sigma: float = 0.1
    noise_d_target: float = 0.1
    noise_adapt_rate: float = 1.01
    noise_sigma_bounds: tuple[float, float] = (1e-3, 1.0)
    clip: float = 10.0
    seed: int = 0
    aggregation: str = "sum"
    update_chunk: int = 8
    update_epochs: int = 4
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    priority_weights: PriorityWeights = field(default_factory=PriorityWeights)

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must be <= epsilon_start")
        if self.lr_end > self.lr_start:
            raise ValueError("lr_end must be <= lr_start")


def decay_tau(cfg: TrainConfig, total_episodes: int) -> float:
    return cfg.tau if cfg.tau is not None else max(total_episodes / 3.0, 1.0)


def epsilon(t: float, cfg: TrainConfig, tau: float) -> float:
    """Exploration rate at episode t: end + (start - end) * exp(-t/tau)."""
    return cfg.epsilon_end + (cfg.epsilon_start - cfg.epsilon_end) * np.exp(-t / tau)


def learning_rate(t: float, cfg: TrainConfig, tau: float) -> float:
    """Learning rate at episode t: end + (start - end) * exp(-t/tau)."""
    return cfg.lr_end + (cfg.lr_start - cfg.lr_end) * np.exp(-t / tau)


def perturb_parameters(store: ParameterStore, sigma: float, rng: np.random.Generator) -> ParameterStore:
    """Copy of the store with Gaussian noise of scale `sigma` added to the
    actor-head parameters only."""
    if sigma < 0:
        raise ValueError("noise scale must be >= 0")
    noisy = ParameterStore()
    actor_names = set(actor_parameter_names(store))
    for name in store.names():
        value = store.params[name].data.copy()
        if name in actor_names and sigma > 0:
            value += sigma * rng.standard_normal(value.shape)
        noisy.add(name, value)
        noisy.moment1[name][...] = store.moment1[name]
        noisy.moment2[name][...] = store.moment2[name]
    noisy.step_count = store.step_count
    return noisy


def adapt_noise(sigma_prev: float, d_measured: float, cfg: TrainConfig) -> float:
    """Geometric update of the noise scale toward the target action deviation:
    grow when the policy moved less than the target, shrink when more.

    The scale is clamped into `noise_sigma_bounds`: a saturated policy can
    report zero deviation indefinitely, and an uncapped geometric growth
    would swamp the actor weights.
    """
    if sigma_prev <= 0:
        raise ValueError("noise scale must be > 0")
    sigma = sigma_prev * cfg.noise_adapt_rate ** np.sign(cfg.noise_d_target - d_measured)
    lo, hi = cfg.noise_sigma_bounds
    return float(np.clip(sigma, lo, hi))


@dataclass(frozen=True)
class Transition:
    """One step of an episode, with everything the update pass needs to
    rebuild its piece of the loss.

    `action_u` is the pre-squash action: the Gaussian draw itself for policy
    steps, the inverse-squashed executed time for uniform-exploration steps.
    `on_policy` marks actions sampled from the policy; only those enter the
    policy-gradient term (uniform exploration steps would bias it), while
    every transition trains the critic.
    """

    state: EnvState
    aircraft_id: int
    row: int
    action_u: float
    reward: float
    done: bool
    on_policy: bool = True


def advantage(reward_value: float, value: float, next_value: float, gamma: float, done: bool) -> float:
    """One-step bootstrapped advantage; terminal transitions use V(s') = 0."""
    bootstrap = 0.0 if done else gamma * next_value
    return reward_value + bootstrap - value


def actor_loss(policy: PolicyNetwork, transitions, advantages, priority_weights, entropy_coeff: float):
    """-mean(log pi(a|s) * A) - entropy_coeff * mean(H); advantages enter as
    constants so the gradient is the policy-gradient estimator."""
    total = None
    batch = len(transitions)
    for tr, adv in zip(transitions, advantages):
        z = policy.encode(build_graph(tr.state, priority_weights))
        log_prob, entropy, _ = policy.log_prob_entropy(z, tr.row, tr.action_u)
        term = log_prob * (-float(adv) / batch) + entropy * (-entropy_coeff / batch)
        total = term if total is None else total + term
    return total


def critic_loss(policy: PolicyNetwork, transitions, targets, priority_weights):
    """Mean squared TD error against precomputed bootstrap targets."""
    total = None
    batch = len(transitions)
    for tr, target in zip(transitions, targets):
        v = policy.value_tensor(policy.encode(build_graph(tr.state, priority_weights)))
        term = (v - float(target)) * (v - float(target)) * (1.0 / batch)
        total = term if total is None else total + term
    return total


@dataclass
class TrainLog:
    """Append-only per-episode record; the CSV column set is fixed."""

    episodes: list[dict] = field(default_factory=list)

    COLUMNS = ("episode", "reward", "cost", "avg_delay_s", "epsilon", "lr", "noise_sigma")

    def append(self, **row) -> None:
        self.episodes.append({k: row[k] for k in self.COLUMNS})

    def column(self, name: str) -> list:
        return [row[name] for row in self.episodes]

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        buf.write(",".join(self.COLUMNS) + "\n")
        for row in self.episodes:
            buf.write(",".join(_fmt(row[c]) for c in self.COLUMNS) + "\n")
        return buf.getvalue().encode()


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _scenarios(data, cfg: TrainConfig):
    """Normalize the training input into a list of scenarios; each scenario
    yields a deterministic instance per episode."""
    if isinstance(data, (Instance, ScenarioSpec)):
        data = [data]
    scenarios = []
    for item in data:
        if isinstance(item, Instance):
            scenarios.append(("instance", item))
        elif isinstance(item, ScenarioSpec):
            scenarios.append(("spec", item))
        else:
            raise TypeError(f"cannot train on {type(item).__name__}")
    return scenarios


def _episode_instance(kind, payload, episode_idx: int) -> Instance:
    if kind == "instance":
        return payload
    spec = replace(payload, seed=payload.seed * 1_000_003 + episode_idx)
    return synthesize(spec)


class Trainer:
    """Owns the policy parameters, the RNG, and the episode/update loop."""

    def __init__(self, cfg: TrainConfig, policy: PolicyNetwork | None = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.policy = policy or PolicyNetwork(seed=cfg.seed, aggregation=cfg.aggregation)
        self.sigma = cfg.noise_sigma
        self.log = TrainLog()
        self._adjust_cfg = AssignmentConfig(max_backtracks=0)

    # --- rollout ---------------------------------------------------------

    def _rollout(self, inst: Instance, eps_t: float):
        """Run one episode; returns (transitions, total reward, final state)
        or None when the safety layer cannot place an aircraft."""
        cfg = self.cfg
        noisy = self.policy.with_store(perturb_parameters(self.policy.store, self.sigma, self.rng))
        order = priority_order(inst, cfg.priority_weights)
        cost_norm = delay_cost_normalizer(inst)
        windows = {a.id: (a.earliest, a.latest) for a in inst.aircraft}

        state = reset(inst)
        transitions: list[Transition] = []
        total_reward = 0.0
        d_samples: list[float] = []
        queue = [aid for aid in order]
        row_of = {aid: inst.index_of(aid) for aid in order}

        while not state.done:
            aid = next(a for a in queue if a not in state.assigned)
            lo, hi = windows[aid]
            exploring = self.rng.random() < eps_t
            if exploring:
                proposal = float(self.rng.uniform(lo, hi))
                action_u = float(unsquash(proposal, lo, hi))
            else:
                graph = build_graph(state, cfg.priority_weights)
                noisy_dist = noisy.distributions_for(graph, windows)
                clean_dist = self.policy.distributions_for(graph, windows)
                row = row_of[aid]
                draw = float(self.rng.normal(noisy_dist.mu[row], noisy_dist.sigma[row]))
                proposal = float(np.clip(squash_to_window(draw, lo, hi), lo, hi))
                action_u = draw
                if hi > lo:
                    d_samples.append(abs(noisy_dist.t[row] - clean_dist.t[row]) / (hi - lo))
            try:
                placed = assign_all({aid: proposal}, state, self._adjust_cfg, cfg.priority_weights)
            except InfeasibleInstanceError:
                return None
            t_exec = placed.time_of(aid)
            snapshot = state
            state, r, done = step(state, aid, t_exec, cfg.reward_weights, cost_norm)
            total_reward += r
            transitions.append(
                Transition(snapshot, aid, row_of[aid], action_u, r, done, on_policy=not exploring)
            )

        if d_samples:
            self.sigma = float(adapt_noise(self.sigma, float(np.mean(d_samples)), self.cfg))
        return transitions, total_reward, state

    # --- update ----------------------------------------------------------

    def _update(self, transitions: list[Transition], lr: float) -> None:
        cfg = self.cfg
        policy = self.policy
        batch = len(transitions)

        # numeric value prepass for bootstrap targets and advantages
        values = [policy.value(build_graph(tr.state, cfg.priority_weights)) for tr in transitions]
        targets = []
        advantages = []
        for k, tr in enumerate(transitions):
            next_value = 0.0 if tr.done else values[k + 1] if k + 1 < batch else 0.0
            targets.append(tr.reward + (0.0 if tr.done else cfg.gamma * next_value))
            advantages.append(advantage(tr.reward, values[k], next_value, cfg.gamma, tr.done))
        # Standardize advantages per episode over the policy's own actions.
        # Until the slow-moving critic catches up with the reward scale, raw
        # advantages share a large positive offset that turns the policy
        # gradient into plain likelihood maximization of whatever was
        # executed; centering removes the offset and unit-scaling keeps the
        # entropy bonus competitive so the action stddev cannot silently
        # collapse.
        actor_rows = [k for k, tr in enumerate(transitions) if tr.on_policy]
        scaled = dict.fromkeys(actor_rows, 0.0)
        if len(actor_rows) > 1:
            subset = np.array([advantages[k] for k in actor_rows])
            std = float(subset.std())
            if std > 1e-8:
                centered = (subset - subset.mean()) / std
                scaled = dict(zip(actor_rows, centered))
        n_actor = max(len(actor_rows), 1)

        adam = AdamConfig(lr=lr, clip=cfg.clip)
        for _ in range(cfg.update_epochs):
            policy.store.zero_grad()
            for start in range(0, batch, cfg.update_chunk):
                chunk = transitions[start : start + cfg.update_chunk]
                loss = None
                for offset, tr in enumerate(chunk):
                    k = start + offset
                    z = policy.encode(build_graph(tr.state, cfg.priority_weights))
                    v = policy.value_tensor(z)
                    term = (v - targets[k]) * (v - targets[k]) * (1.0 / batch)
                    if tr.on_policy and k in scaled:
                        log_prob, entropy, _ = policy.log_prob_entropy(z, tr.row, tr.action_u)
                        term = term + log_prob * (-scaled[k] / n_actor) + entropy * (
                            -cfg.entropy_coeff / n_actor
                        )
                    loss = term if loss is None else loss + term
                backward(loss)
            adam_step(policy.store, policy.store.gradients(), adam)

    # --- main loop -------------------------------------------------------

    def train(self, data) -> tuple[PolicyNetwork, TrainLog]:
        cfg = self.cfg
        scenarios = _scenarios(data, cfg)
        total = cfg.episodes_per_scenario * len(scenarios)
        tau = decay_tau(cfg, total)

        episode = 0
        for kind, payload in scenarios:
            recent: list[float] = []
            best_mean = -np.inf
            stall = 0
            for _ in range(cfg.episodes_per_scenario):
                eps_t = float(epsilon(episode, cfg, tau))
                lr_t = float(learning_rate(episode, cfg, tau))
                inst = _episode_instance(kind, payload, episode)
                outcome = self._rollout(inst, eps_t)
                if outcome is None:
                    self.log.append(
                        episode=episode, reward=float("nan"), cost=float("nan"),
                        avg_delay_s=float("nan"), epsilon=eps_t, lr=lr_t,
                        noise_sigma=self.sigma,
                    )
                    episode += 1
                    continue
                transitions, total_reward, final_state = outcome
                self._update(transitions, lr_t)

                schedule = Schedule(final_state.assigned)
                cost = total_cost(inst, schedule)
                delays = [deviation(schedule.time_of(a.id), a.target).lateness for a in inst.aircraft]
                self.log.append(
                    episode=episode, reward=total_reward, cost=cost,
                    avg_delay_s=float(np.mean(delays)), epsilon=eps_t, lr=lr_t,
                    noise_sigma=self.sigma,
                )
                episode += 1

                recent.append(total_reward)
                if len(recent) > cfg.plateau_window:
                    recent.pop(0)
                if len(recent) == cfg.plateau_window:
                    mean = float(np.mean(recent))
                    if mean > best_mean + 1e-12:
                        best_mean = mean
                        stall = 0
                    else:
                        stall += 1
                    if stall >= cfg.plateau_window:
                        break  # reward plateaued for a full window
        return self.policy, self.log


def train(data, cfg: TrainConfig | None = None, policy: PolicyNetwork | None = None):
    """Train a policy over the given instances or scenario specs; returns the
    trained policy and its per-episode log."""
    trainer = Trainer(cfg or TrainConfig(), policy)
    return trainer.train(data)


def save_policy(policy: PolicyNetwork, path) -> None:
    save_checkpoint(policy.store, path)


def load_policy(path) -> PolicyNetwork:
    return PolicyNetwork(store=load_checkpoint(path))
