import numpy as np
import pytest

from alpsched.core import WakeClass
from alpsched.env import reset
from alpsched.graphs import build_graph
from alpsched.nn.autodiff import backward
from alpsched.policy import (
    HIDDEN,
    LOG_SIGMA_MAX,
    PolicyNetwork,
    act,
    sample_action,
    sigma_from_log,
    squash_to_window,
    unsquash,
)

from conftest import make_instance, plane, random_instance

H, M, L = WakeClass.HEAVY, WakeClass.MEDIUM, WakeClass.LIGHT

FD_STEP = 1e-5
FD_TOL = 1e-4


def three_plane_graph(rng):
    inst = random_instance(rng, n=3)
    return inst, build_graph(reset(inst))


def test_encode_single_node():
    inst = make_instance([plane(1, H, 1000)])
    g = build_graph(reset(inst))
    z = PolicyNetwork(seed=0).encode(g)
    assert z.shape == (1, HIDDEN)
    assert np.isfinite(z.data).all()


def test_encode_shapes_and_determinism(rng):
    inst, g = three_plane_graph(rng)
    policy = PolicyNetwork(seed=1)
    z1, z2 = policy.encode(g), policy.encode(g)
    assert z1.shape == (3, HIDDEN)
    assert (z1.data == z2.data).all()


def test_encode_permutation_equivariance(rng):
    inst = random_instance(rng, n=5)
    perm = rng.permutation(5)
    shuffled = make_instance([inst.aircraft[k] for k in perm], buffer_s=inst.buffer_s)
    policy = PolicyNetwork(seed=3)
    z = policy.encode(build_graph(reset(inst)))
    zp = policy.encode(build_graph(reset(shuffled)))
    assert zp.data == pytest.approx(z.data[perm], abs=1e-9)


def test_encode_identical_aircraft_same_rows():
    planes = [plane(k, M, 5000, cost=(1, 2, 3, 4)) for k in (1, 2, 3)]
    inst = make_instance(planes)
    z = PolicyNetwork(seed=5).encode(build_graph(reset(inst)))
    assert z.data[1] == pytest.approx(z.data[0])
    assert z.data[2] == pytest.approx(z.data[0])


def test_value_permutation_invariant(rng):
    inst = random_instance(rng, n=5)
    perm = rng.permutation(5)
    shuffled = make_instance([inst.aircraft[k] for k in perm], buffer_s=inst.buffer_s)
    policy = PolicyNetwork(seed=3)
    v = policy.value(build_graph(reset(inst)))
    vp = policy.value(build_graph(reset(shuffled)))
    assert vp == pytest.approx(v, abs=1e-9)
    assert np.isscalar(v) or isinstance(v, float)


def test_value_finite_over_random_inputs(rng):
    policy = PolicyNetwork(seed=4)
    for _ in range(100):
        inst = random_instance(rng, n=int(rng.integers(1, 8)))
        assert np.isfinite(policy.value(build_graph(reset(inst))))


# --- action mapping -------------------------------------------------------------

def test_act_midpoint_and_limits():
    assert act(0.0, 100.0, 500.0) == pytest.approx(300.0)
    assert act(40.0, 100.0, 500.0) == pytest.approx(500.0)  # sigmoid saturates
    assert act(-40.0, 100.0, 500.0) == pytest.approx(100.0)
    assert 100.0 < act(1.3, 100.0, 500.0) < 500.0


def test_sigma_clamp_arithmetic():
    assert sigma_from_log(5.0) == pytest.approx(np.exp(2.0) + 1e-5)
    assert sigma_from_log(-50.0) == pytest.approx(np.exp(-10.0) + 1e-5)
    assert sigma_from_log(np.array([0.0]))[0] == pytest.approx(1.0 + 1e-5)


def test_unsquash_inverts_squash(rng):
    for _ in range(200):
        lo = rng.uniform(0, 1000)
        hi = lo + rng.uniform(1, 2000)
        u = rng.uniform(-8, 8)
        t = squash_to_window(u, lo, hi)
        assert unsquash(t, lo, hi) == pytest.approx(u, abs=1e-6)


def test_sample_action_within_window_and_seeded(rng):
    inst = random_instance(rng, n=4)
    g = build_graph(reset(inst))
    policy = PolicyNetwork(seed=0)
    windows = {a.id: (a.earliest, a.latest) for a in inst.aircraft}
    dist = policy.distributions_for(g, windows)
    t1 = sample_action(dist, np.random.default_rng(99))
    t2 = sample_action(dist, np.random.default_rng(99))
    assert (t1 == t2).all()
    assert ((dist.earliest <= t1) & (t1 <= dist.latest)).all()


def test_sample_action_degenerate_sigma(rng):
    inst = random_instance(rng, n=2)
    g = build_graph(reset(inst))
    policy = PolicyNetwork(seed=0)
    windows = {a.id: (a.earliest, a.latest) for a in inst.aircraft}
    dist = policy.distributions_for(g, windows)
    tight = type(dist)(dist.ids, dist.mu, np.full_like(dist.sigma, 1e-12), dist.t,
                       dist.earliest, dist.latest)
    sampled = sample_action(tight, np.random.default_rng(1))
    assert sampled == pytest.approx(dist.t, abs=1e-6)


def test_deterministic_times_strictly_inside_window(rng):
    for _ in range(20):
        inst = random_instance(rng, n=3)
        g = build_graph(reset(inst))
        policy = PolicyNetwork(seed=int(rng.integers(100)))
        windows = {a.id: (a.earliest, a.latest) for a in inst.aircraft}
        dist = policy.distributions_for(g, windows)
        assert ((dist.earliest < dist.t) & (dist.t < dist.latest)).all()


# --- end-to-end gradients --------------------------------------------------------

def subset_grad_check(policy, loss_fn, names, rng, entries_per_param=4):
    """Central-difference check on a random subset of coordinates of each
    named parameter."""
    policy.store.zero_grad()
    loss = loss_fn()
    backward(loss)
    worst = 0.0
    for name in names:
        tensor = policy.store[name]
        grad = tensor.grad
        assert grad is not None, f"no gradient reached {name}"
        flat = tensor.data.reshape(-1)
        idxs = rng.choice(flat.size, size=min(entries_per_param, flat.size), replace=False)
        for idx in idxs:
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            hi = float(loss_fn().data)
            flat[idx] = orig - FD_STEP
            lo = float(loss_fn().data)
            flat[idx] = orig
            numeric = (hi - lo) / (2 * FD_STEP)
            analytic = grad.reshape(-1)[idx]
            err = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, err)
    assert worst < FD_TOL, f"max rel err {worst:.3e}"


def test_actor_loss_gradients_reach_every_parameter(rng):
    inst, g = three_plane_graph(rng)
    policy = PolicyNetwork(seed=11)
    action_u = 0.37
    advantages = [0.8, -0.3, 1.2]

    def loss_fn():
        z = policy.encode(g)
        total = None
        for row in range(3):
            lp, ent, _ = policy.log_prob_entropy(z, row, action_u + 0.1 * row)
            term = lp * (-advantages[row]) + ent * (-0.02)
            total = term if total is None else total + term
        return total

    names = [n for n in policy.store.names() if not n.startswith(("critic.", "_meta"))]
    subset_grad_check(policy, loss_fn, names, rng)


def test_critic_loss_gradients(rng):
    inst, g = three_plane_graph(rng)
    policy = PolicyNetwork(seed=13)
    target = 1.5

    def loss_fn():
        v = policy.value_tensor(policy.encode(g))
        return (v - target) * (v - target)

    names = [n for n in policy.store.names() if not n.startswith(("actor.", "_meta"))]
    subset_grad_check(policy, loss_fn, names, rng)


def test_mean_aggregation_mode(rng):
    inst, g = three_plane_graph(rng)
    policy = PolicyNetwork(seed=2, aggregation="mean")
    assert policy.aggregation == "mean"
    z = policy.encode(g)
    assert z.shape == (3, HIDDEN)
    # meta flag survives a store round trip
    clone = PolicyNetwork(store=policy.store)
    assert clone.aggregation == "mean"
