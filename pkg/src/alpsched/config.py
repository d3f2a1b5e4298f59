"""Flat key = value config files for training and environment weights.

Lines look like ``epsilon_start = 0.9`` or ``reward_weights = 1.0, 2.0, 0.5,
0.3``; blank lines and ``#`` comments are ignored.  Unknown keys are
rejected so typos fail loudly.
"""
from __future__ import annotations

from .env import PriorityWeights, RewardWeights
from .training import TrainConfig

_SCALAR_KEYS = {
    "episodes_per_scenario": int,
    "gamma": float,
    "entropy_coeff": float,
    "lr_start": float,
    "lr_end": float,
    "epsilon_start": float,
    "epsilon_end": float,
    "tau": float,
    "plateau_window": int,
    "noise_sigma": float,
    "noise_d_target": float,
    "noise_adapt_rate": float,
    "clip": float,
    "seed": int,
    "aggregation": str,
    "update_chunk": int,
}

_TUPLE_KEYS = {
    "scenario_sizes": int,
    "reward_weights": float,
    "priority_weights": float,
    "wake_mix": float,
}

_SYNTH_KEYS = {
    "arrival_rate": float,
    "window_before": float,
    "window_after": float,
    "synth_hour": int,
    "buffer_s": float,
}


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict:
    """Parse config text into typed values."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _TUPLE_KEYS:
                cast = _TUPLE_KEYS[key]
                out[key] = tuple(cast(v.strip()) for v in value.split(","))
            elif key in _SCALAR_KEYS:
                out[key] = _SCALAR_KEYS[key](value)
            elif key in _SYNTH_KEYS:
                out[key] = _SYNTH_KEYS[key](value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def train_config_from(values: dict, seed: int | None = None, episodes: int | None = None) -> TrainConfig:
    """Build a TrainConfig from parsed values; CLI overrides win."""
    kwargs = {k: v for k, v in values.items() if k in _SCALAR_KEYS or k == "scenario_sizes"}
    if "reward_weights" in values:
        kwargs["reward_weights"] = RewardWeights(*values["reward_weights"])
    if "priority_weights" in values:
        kwargs["priority_weights"] = PriorityWeights(*values["priority_weights"])
    if seed is not None:
        kwargs["seed"] = seed
    if episodes is not None:
        kwargs["episodes_per_scenario"] = episodes
    return TrainConfig(**kwargs)


def synth_kwargs_from(values: dict) -> dict:
    """Scenario-spec overrides carried by the config file."""
    out = {}
    if "arrival_rate" in values:
        out["arrival_rate"] = values["arrival_rate"]
    if "window_before" in values:
        out["window_before"] = values["window_before"]
    if "window_after" in values:
        out["window_after"] = values["window_after"]
    if "synth_hour" in values:
        out["hour"] = values["synth_hour"]
    if "wake_mix" in values:
        out["wake_mix"] = values["wake_mix"]
    if "buffer_s" in values:
        out["buffer_s"] = values["buffer_s"]
    return out
