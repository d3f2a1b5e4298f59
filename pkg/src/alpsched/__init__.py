"""Single-runway aircraft landing scheduling.

A learned scheduler (graph actor-critic with a hard safety-assignment layer)
alongside FCFS, tabu-search, and exact-oracle baselines, plus parsing for the
common benchmark formats and a benchmark CLI.
"""
from .baselines import TabuConfig, exact_oracle, fcfs, tabu_search
from .core import (
    Aircraft,
    CostProfile,
    Deviation,
    Instance,
    Schedule,
    SeparationMatrix,
    ViolationKind,
    ViolationReport,
    WakeClass,
    delay_histogram,
    deviation,
    required_separation,
    runway_throughput,
    tiered_delay_cost,
    total_cost,
    validate_schedule,
)
from .dataio import (
    RunReport,
    RunRow,
    ScenarioSpec,
    parse_ikli_csv,
    parse_orlibrary,
    read_report,
    synthesize,
    write_report,
)
from .env import EnvState, PriorityWeights, RewardWeights, priority_score, reset, reward, step
from .estimators import DrlScheduler, ExactScheduler, FcfsScheduler, TabuScheduler
from .graphs import StateGraph, build_graph, edge_weight
from .policy import PolicyNetwork
from .safety import AssignmentConfig, InfeasibleInstanceError, adjust_landing_time, assign_all, validate_separation
from .training import TrainConfig, TrainLog, train

__version__ = "0.1.0"

__all__ = [
    "Aircraft",
    "AssignmentConfig",
    "CostProfile",
    "Deviation",
    "DrlScheduler",
    "EnvState",
    "ExactScheduler",
    "FcfsScheduler",
    "InfeasibleInstanceError",
    "Instance",
    "PolicyNetwork",
    "PriorityWeights",
    "RewardWeights",
    "RunReport",
    "RunRow",
    "ScenarioSpec",
    "Schedule",
    "SeparationMatrix",
    "StateGraph",
    "TabuConfig",
    "TabuScheduler",
    "TrainConfig",
    "TrainLog",
    "ViolationKind",
    "ViolationReport",
    "WakeClass",
    "adjust_landing_time",
    "assign_all",
    "build_graph",
    "delay_histogram",
    "deviation",
    "edge_weight",
    "exact_oracle",
    "fcfs",
    "parse_ikli_csv",
    "parse_orlibrary",
    "priority_score",
    "read_report",
    "required_separation",
    "reset",
    "reward",
    "runway_throughput",
    "step",
    "synthesize",
    "tabu_search",
    "tiered_delay_cost",
    "total_cost",
    "train",
    "validate_schedule",
    "validate_separation",
    "write_report",
]
