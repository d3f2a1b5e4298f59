"""Scheduler estimators with a scikit-learn style surface.

Every scheduler exposes ``get_params``/``set_params`` (so ``sklearn.clone``
and grid-search tooling compose with them) and ``predict``, mapping problem
instances to feasible schedules.  `DrlScheduler` additionally learns from
instances or scenario specs via ``fit``; the rule-based schedulers are
stateless and ``fit`` is a no-op for API symmetry.
"""
from __future__ import annotations

import inspect

import numpy as np

from .baselines import TabuConfig, exact_oracle, fcfs, tabu_search
from .core import Instance, Schedule, validate_schedule
from .dataio import ScenarioSpec
from .env import reset
from .graphs import build_graph
from .policy import PolicyNetwork
from .safety import AssignmentConfig, assign_all
from .training import TrainConfig, Trainer, load_policy, save_policy


def check_instance(inst) -> Instance:
    """Validate a predict/fit input; raises TypeError/ValueError early so the
    error points at the caller instead of deep inside a solver."""
    if not isinstance(inst, Instance):
        raise TypeError(f"expected an Instance, got {type(inst).__name__}")
    return inst


class BaseScheduler:
    """get_params/set_params per the scikit-learn estimator contract: every
    constructor argument is stored verbatim under its own name."""

    @classmethod
    def _param_names(cls) -> list[str]:
        if cls.__init__ is object.__init__:
            return []
        sig = inspect.signature(cls.__init__)
        return [
            p.name
            for p in sig.parameters.values()
            if p.name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def fit(self, X, y=None):
        return self

    def _solve(self, inst: Instance) -> Schedule:
        raise NotImplementedError

    def predict(self, X):
        """Schedule one instance or a list of instances."""
        if isinstance(X, Instance):
            return self._solve(check_instance(X))
        return [self._solve(check_instance(inst)) for inst in X]

    def score(self, X, y=None) -> float:
        """Negative mean total cost over the given instances (higher is better)."""
        from .core import total_cost

        instances = [X] if isinstance(X, Instance) else list(X)
        costs = [total_cost(inst, self._solve(inst)) for inst in instances]
        return -float(np.mean(costs))

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class FcfsScheduler(BaseScheduler):
    """First-come-first-serve in actual-arrival order."""

    def _solve(self, inst: Instance) -> Schedule:
        return fcfs(inst)


class TabuScheduler(BaseScheduler):
    """Tabu search over landing orders, seeded from the FCFS incumbent."""

    def __init__(self, tenure: int = 7, max_iterations: int = 500, seed: int = 0):
        self.tenure = tenure
        self.max_iterations = max_iterations
        self.seed = seed

    def _solve(self, inst: Instance) -> Schedule:
        cfg = TabuConfig(tenure=self.tenure, max_iterations=self.max_iterations, seed=self.seed)
        return tabu_search(inst, cfg)


class ExactScheduler(BaseScheduler):
    """Exact small-instance oracle; `cps` switches to constrained position
    shifting, which scales to 30 aircraft."""

    def __init__(self, cps: int | None = None):
        self.cps = cps

    def _solve(self, inst: Instance) -> Schedule:
        return exact_oracle(inst, cps=self.cps)


class DrlScheduler(BaseScheduler):
    """Learned scheduler: a graph actor-critic proposes landing times, the
    safety layer turns them into a feasible schedule.

    ``fit`` trains on instances and/or scenario specs; an unfitted scheduler
    still predicts (fresh random policy) since the safety layer alone
    guarantees feasibility.
    """

    def __init__(
        self,
        episodes_per_scenario: int = 2000,
        seed: int = 0,
        aggregation: str = "sum",
        max_attempts: int = 7,
        train_config: TrainConfig | None = None,
    ):
        self.episodes_per_scenario = episodes_per_scenario
        self.seed = seed
        self.aggregation = aggregation
        self.max_attempts = max_attempts
        self.train_config = train_config
        self._policy: PolicyNetwork | None = None
        self._log = None

    # --- model plumbing ---------------------------------------------------

    @property
    def policy_(self) -> PolicyNetwork:
        if self._policy is None:
            self._policy = PolicyNetwork(seed=self.seed, aggregation=self.aggregation)
        return self._policy

    @property
    def train_log_(self):
        return self._log

    def load(self, path) -> "DrlScheduler":
        self._policy = load_policy(path)
        return self

    def save(self, path) -> "DrlScheduler":
        save_policy(self.policy_, path)
        return self

    # --- estimator surface --------------------------------------------------

    def fit(self, X, y=None):
        """Train on a list of Instances and/or ScenarioSpecs (curriculum in
        list order)."""
        data = [X] if isinstance(X, (Instance, ScenarioSpec)) else list(X)
        cfg = self.train_config or TrainConfig(
            episodes_per_scenario=self.episodes_per_scenario,
            seed=self.seed,
            aggregation=self.aggregation,
        )
        trainer = Trainer(cfg, policy=self._policy)
        self._policy, self._log = trainer.train(data)
        return self

    def _solve(self, inst: Instance) -> Schedule:
        policy = self.policy_
        state = reset(inst)
        graph = build_graph(state)
        windows = {a.id: (a.earliest, a.latest) for a in inst.aircraft}
        dist = policy.distributions_for(graph, windows)
        proposals = {aid: float(t) for aid, t in zip(dist.ids, dist.t)}
        cfg = AssignmentConfig(max_attempts=self.max_attempts)
        schedule = assign_all(proposals, inst, cfg)
        report = validate_schedule(inst, schedule)
        if not report.feasible:
            raise RuntimeError(f"safety layer emitted violations: {report.violations[:3]}")
        return schedule
