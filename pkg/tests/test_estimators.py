import numpy as np
import pytest

from alpsched.core import total_cost, validate_schedule
from alpsched.dataio import ScenarioSpec
from alpsched.estimators import DrlScheduler, ExactScheduler, FcfsScheduler, TabuScheduler
from alpsched.training import TrainConfig

from conftest import random_instance


def test_get_set_params_roundtrip():
    sched = TabuScheduler(tenure=9, max_iterations=50, seed=3)
    params = sched.get_params()
    assert params == {"tenure": 9, "max_iterations": 50, "seed": 3}
    sched.set_params(tenure=4)
    assert sched.tenure == 4
    with pytest.raises(ValueError):
        sched.set_params(bogus=1)


def test_constructible_from_own_params():
    for est in (FcfsScheduler(), TabuScheduler(max_iterations=25), ExactScheduler(cps=2),
                DrlScheduler(episodes_per_scenario=3, seed=1)):
        clone = type(est)(**est.get_params())
        assert clone.get_params() == est.get_params()


def test_sklearn_clone_compatibility():
    sklearn = pytest.importorskip("sklearn")
    from sklearn.base import clone

    est = TabuScheduler(tenure=5, max_iterations=10, seed=2)
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_predict_single_and_batch(rng):
    instances = [random_instance(rng, n=4, mean_gap=200.0) for _ in range(3)]
    sched = FcfsScheduler()
    single = sched.predict(instances[0])
    batch = sched.predict(instances)
    assert single.times == batch[0].times
    assert len(batch) == 3


def test_predict_rejects_non_instance():
    with pytest.raises(TypeError):
        FcfsScheduler().predict("not an instance")


def test_score_is_negative_mean_cost(rng):
    instances = [random_instance(rng, n=4, mean_gap=100.0) for _ in range(2)]
    sched = FcfsScheduler()
    costs = [total_cost(inst, sched.predict(inst)) for inst in instances]
    assert sched.score(instances) == pytest.approx(-np.mean(costs))


def test_drl_unfitted_predicts_feasible(rng):
    inst = random_instance(rng, n=8, mean_gap=100.0)
    schedule = DrlScheduler(seed=0).predict(inst)
    assert validate_schedule(inst, schedule).feasible


def test_drl_fit_predict_save_load(tmp_path, rng):
    cfg = TrainConfig(episodes_per_scenario=6, scenario_sizes=(3,), seed=1)
    sched = DrlScheduler(train_config=cfg, seed=1)
    sched.fit(ScenarioSpec(count=3, seed=2))
    assert sched.train_log_ is not None and len(sched.train_log_.episodes) == 6
    inst = random_instance(rng, n=5, mean_gap=150.0)
    before = sched.predict(inst)
    assert validate_schedule(inst, before).feasible

    path = tmp_path / "model.ckpt"
    sched.save(path)
    loaded = DrlScheduler().load(path)
    after = loaded.predict(inst)
    assert after.times == before.times


def test_tabu_estimator_uses_its_params(rng):
    inst = random_instance(rng, n=6, mean_gap=60.0)
    quick = TabuScheduler(max_iterations=1).predict(inst)
    thorough = TabuScheduler(max_iterations=300).predict(inst)
    assert total_cost(inst, thorough) <= total_cost(inst, quick) + 1e-9


def test_exact_estimator_cps_param(rng):
    inst = random_instance(rng, n=12, mean_gap=90.0, window_after=8000.0)
    schedule = ExactScheduler(cps=2).predict(inst)
    assert validate_schedule(inst, schedule).feasible
