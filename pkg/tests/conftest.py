"""Shared builders for tests."""
import numpy as np
import pytest

from alpsched.core import Aircraft, CostProfile, Instance, WakeClass


def plane(
    id=1,
    wake=WakeClass.HEAVY,
    target=1000.0,
    earliest=None,
    latest=None,
    cost=(1.0, 2.0, 3.0, 4.0),
    ata=None,
    early=0.0,
):
    if earliest is None:
        earliest = max(target - 600.0, 0.0)
    if latest is None:
        latest = target + 900.0
    if isinstance(cost, CostProfile):
        profile = cost
    elif early:
        profile = CostProfile.from_linear(early, cost[0])
    else:
        profile = CostProfile(*cost)
    return Aircraft(id=id, wake=wake, target=target, earliest=earliest, latest=latest,
                    cost=profile, ata=ata)


def make_instance(planes, buffer_s=30.0, precedence=(), **kwargs):
    return Instance(aircraft=tuple(planes), buffer_s=buffer_s,
                    precedence=frozenset(precedence), **kwargs)


def random_instance(rng, n=None, mean_gap=120.0, window_after=900.0, window_before=600.0,
                    wake_mix=(0.2, 0.6, 0.2)):
    """Hand-rolled random instance, independent of dataio.synthesize."""
    n = n or int(rng.integers(1, 21))
    base = 25000.0
    gaps = rng.exponential(mean_gap, size=n)
    targets = base + np.cumsum(gaps)
    wakes = rng.choice(3, size=n, p=wake_mix)
    planes = []
    for k in range(n):
        rates = (rng.uniform(0.3, 1), rng.uniform(1, 3), rng.uniform(2, 6), rng.uniform(5, 15))
        planes.append(
            plane(id=k + 1, wake=WakeClass(int(wakes[k])), target=float(targets[k]),
                  earliest=max(float(targets[k]) - window_before, 0.0),
                  latest=float(targets[k]) + window_after,
                  cost=rates, ata=float(targets[k] + rng.normal(0, 30)))
        )
    return make_instance(planes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
