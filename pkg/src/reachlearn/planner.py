"""Open-loop cross-entropy planner with warm starting and receding-horizon execution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator


@dataclass(frozen=True)
class CemConfig:
    population: int = 128
    elite_count: int = 16
    iterations: int = 8
    horizon: int = 14
    init_stddev: float = 10.0
    min_stddev: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.iterations < 1 or self.horizon < 1:
            raise ValueError("population, iterations and horizon must be >= 1")
        if not 0 < self.elite_count <= self.population:
            raise ValueError(
                f"elite_count must lie in (0, population], got {self.elite_count}/{self.population}"
            )
        if self.init_stddev <= 0 or self.min_stddev <= 0 or self.min_stddev > self.init_stddev:
            raise ValueError("need 0 < min_stddev <= init_stddev")


@dataclass(frozen=True)
class PlanDistribution:
    mean: np.ndarray  # (horizon, 2)
    stddev: np.ndarray

    @classmethod
    def fresh(cls, config: CemConfig, n_act: int = 2) -> "PlanDistribution":
        return cls(np.zeros((config.horizon, n_act)), np.full((config.horizon, n_act), config.init_stddev))


def warm_start(prev: PlanDistribution, init_stddev: float) -> PlanDistribution:
    """Shift the mean one step left, repeat the last row, reset the spread."""
    mean = np.concatenate([prev.mean[1:], prev.mean[-1:]], axis=0)
    return PlanDistribution(mean, np.full_like(prev.stddev, init_stddev))


def cem_plan(model, mem, obs, init: PlanDistribution, config: CemConfig,
             rng: np.random.Generator, action_limit: float, trace=None):
    """Refine ``init`` by CEM against the model's predicted return.

    ``model.rollout_rewards(mem, obs, actions)`` scores a (P, H, 2) batch;
    the memory snapshot is never modified. Returns the best sequence seen
    and the final fitted distribution. If ``trace`` is a list, one dict per
    iteration is appended (best-so-far and elite-mean scores).
    """
    mean, std = init.mean.copy(), np.maximum(init.stddev, config.min_stddev)
    best_seq, best_score = None, -np.inf
    for it in range(config.iterations):
        noise = rng.standard_normal((config.population,) + mean.shape)
        samples = np.clip(mean + std * noise, -action_limit, action_limit)
        scores = np.asarray(model.rollout_rewards(mem, obs, samples), dtype=float)
        order = np.argsort(-scores, kind="stable")
        if scores[order[0]] > best_score:
            best_score = float(scores[order[0]])
            best_seq = samples[order[0]].copy()
        elite = samples[order[:config.elite_count]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), config.min_stddev)
        if trace is not None:
            trace.append({"iteration": it, "best": best_score,
                          "elite_mean": float(scores[order[:config.elite_count]].mean())})
    return best_seq, PlanDistribution(np.clip(mean, -action_limit, action_limit), std)


class CEMAgent(BaseEstimator):
    """Receding-horizon controller around a forward model.

    Real-time memory lives on the agent. ``start_block`` clears it;
    ``start_reach`` keeps it (the model decides what carries over) but drops
    the previous plan so the first step of each reach plans from scratch.
    """

    def __init__(self, model=None, population=128, elite_count=16, iterations=8, horizon=14,
                 init_stddev=10.0, min_stddev=0.4, action_limit=20.0, seed=0):
        self.model = model
        self.population = population
        self.elite_count = elite_count
        self.iterations = iterations
        self.horizon = horizon
        self.init_stddev = init_stddev
        self.min_stddev = min_stddev
        self.action_limit = action_limit
        self.seed = seed

    @property
    def config(self) -> CemConfig:
        return CemConfig(self.population, self.elite_count, self.iterations, self.horizon,
                         self.init_stddev, self.min_stddev, self.seed)

    @classmethod
    def from_config(cls, model, config: CemConfig, action_limit: float, rng=None):
        agent = cls(model, config.population, config.elite_count, config.iterations,
                    config.horizon, config.init_stddev, config.min_stddev, action_limit, config.seed)
        agent.start_block(rng)
        return agent

    def start_block(self, rng=None):
        self.rng_ = rng if rng is not None else np.random.default_rng(self.seed)
        self.memory_ = self.model.reset_memory()
        self.plan_ = None
        return self

    def start_reach(self, obs):
        self.memory_ = self.model.new_reach(self.memory_, obs)
        self.plan_ = None

    def act(self, obs, trace=None) -> np.ndarray:
        cfg = self.config
        init = PlanDistribution.fresh(cfg) if self.plan_ is None else warm_start(self.plan_, cfg.init_stddev)
        seq, self.plan_ = cem_plan(self.model, self.memory_, obs, init, cfg, self.rng_,
                                      self.action_limit, trace)
        action = seq[0]
        # the outcome of this action arrives as the next real observation
        self.memory_, _, _ = self.model.observe(self.memory_, obs, action)
        return action


def act(agent: CEMAgent, obs) -> np.ndarray:
    return agent.act(obs)
