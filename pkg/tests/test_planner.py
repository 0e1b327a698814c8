import numpy as np
import pytest
from sklearn.base import clone

from reachlearn.model import OracleArmModel
from reachlearn.planner import CEMAgent, CemConfig, PlanDistribution, act, cem_plan, warm_start
from reachlearn.task import ReachEnv, TaskInstance
from reachlearn.transforms import identity


class QuadraticModel:
    """Reward depends only on the first action: -||a0 - target||^2."""

    def __init__(self, target):
        self.target = np.asarray(target, float)

    def rollout_rewards(self, mem, obs, actions):
        return -np.sum((actions[:, 0] - self.target) ** 2, axis=-1)


def test_cem_finds_analytic_optimum():
    cfg = CemConfig(population=200, elite_count=20, iterations=10, horizon=1, min_stddev=1e-3)
    model = QuadraticModel([3.0, -7.5])
    seq, dist = cem_plan(model, None, None, PlanDistribution.fresh(cfg), cfg,
                         np.random.default_rng(0), 20.0)
    np.testing.assert_allclose(seq[0], [3.0, -7.5], atol=1e-2)
    assert seq.shape == (1, 2) and dist.mean.shape == (1, 2)


def test_single_member_hill_climb_monotone():
    cfg = CemConfig(population=1, elite_count=1, iterations=30, horizon=3)
    trace = []
    cem_plan(QuadraticModel([5.0, 5.0]), None, None, PlanDistribution.fresh(cfg), cfg,
             np.random.default_rng(1), 20.0, trace)
    best = [t["best"] for t in trace]
    assert len(best) == 30 and all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


def test_best_so_far_non_decreasing():
    cfg = CemConfig(population=16, elite_count=4, iterations=12, horizon=4)
    trace = []
    cem_plan(QuadraticModel([-2.0, 9.0]), None, None, PlanDistribution.fresh(cfg), cfg,
             np.random.default_rng(2), 20.0, trace)
    best = [t["best"] for t in trace]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    assert all(t["elite_mean"] <= t["best"] for t in trace)


def test_plan_deterministic():
    cfg = CemConfig(population=32, elite_count=4, iterations=4, horizon=5)
    runs = [cem_plan(QuadraticModel([1.0, 1.0]), None, None, PlanDistribution.fresh(cfg), cfg,
                     np.random.default_rng(3), 20.0)[0] for _ in range(2)]
    np.testing.assert_array_equal(*runs)


def test_distribution_invariants():
    cfg = CemConfig(population=32, elite_count=4, iterations=6, horizon=5, min_stddev=0.4)
    _, dist = cem_plan(QuadraticModel([50.0, -50.0]), None, None, PlanDistribution.fresh(cfg),
                       cfg, np.random.default_rng(4), 20.0)
    assert np.all(dist.stddev >= 0.4)
    assert np.all(np.abs(dist.mean) <= 20.0)


def test_elite_refit_does_not_lower_elite_score():
    """Refitting to the elites of a frozen sample set cannot make those elites worse."""
    rng = np.random.default_rng(5)
    model = QuadraticModel([2.0, 2.0])
    samples = rng.normal(scale=10, size=(64, 1, 2))
    scores = model.rollout_rewards(None, None, samples)
    elite = samples[np.argsort(-scores)[:8]]
    refit = elite.mean(axis=0, keepdims=True)
    assert model.rollout_rewards(None, None, refit)[0] >= np.mean(
        model.rollout_rewards(None, None, elite))


def test_warm_start_shift_rule():
    a, b, c = [1.0, 2.0], [3.0, 4.0], [5.0, 6.0]
    prev = PlanDistribution(np.array([a, b, c]), np.full((3, 2), 0.7))
    once = warm_start(prev, 10.0)
    np.testing.assert_array_equal(once.mean, [b, c, c])
    np.testing.assert_array_equal(once.stddev, np.full((3, 2), 10.0))
    np.testing.assert_array_equal(warm_start(once, 10.0).mean, [c, c, c])


@pytest.mark.parametrize("kwargs", [
    {"population": 0}, {"elite_count": 0}, {"elite_count": 200}, {"horizon": 0},
    {"min_stddev": 0.0}, {"min_stddev": 20.0},
])
def test_degenerate_config_rejected(kwargs):
    with pytest.raises(ValueError):
        CemConfig(**kwargs)


class RecordingModel(QuadraticModel):
    def __init__(self):
        super().__init__([0.0, 0.0])
        self.inits = []

    def reset_memory(self):
        return None

    def new_reach(self, mem, obs):
        return None

    def observe(self, mem, obs, action):
        return None, obs.cursor, 0.0


def test_first_step_plans_from_scratch():
    agent = CEMAgent(RecordingModel(), population=8, elite_count=2, iterations=1, horizon=3)
    agent.start_block(np.random.default_rng(0))
    env = ReachEnv(TaskInstance(identity(), np.array([8.0, 0.0])))
    assert agent.plan_ is None
    agent.act(env.obs)
    assert agent.plan_ is not None
    agent.start_reach(env.obs)
    assert agent.plan_ is None


def test_oracle_agent_reaches_goal():
    task = TaskInstance(identity(), np.array([0.0, 8.0]))
    model = OracleArmModel(task.transform, task.geom)
    agent = CEMAgent(model, population=64, elite_count=8, iterations=8, horizon=4,
                     init_stddev=2.0, min_stddev=0.4, action_limit=task.geom.acc_limit)
    agent.start_block(np.random.default_rng(11))
    env = ReachEnv(task)
    agent.start_reach(env.obs)
    while not env.done:
        a = act(agent, env.obs)
        assert np.all(np.abs(a) <= task.geom.acc_limit)
        env.step(a)
    assert env.reached


def test_agent_is_an_estimator():
    agent = CEMAgent(population=10, elite_count=3)
    assert clone(agent).get_params()["population"] == 10
    assert agent.config == CemConfig(population=10, elite_count=3)
