"""Training corpora, frozen-weight test blocks, per-reach metrics and aggregation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .arm import ArmGeometry
from .planner import CEMAgent, CemConfig
from .task import (EpisodeConfig, ReachEnv, TaskInstance, Trajectory, random_walk, restart_flags,
                   sample_goal)
from .transforms import SamplerParams, pure_rotation, sampler_for

CONDITIONS = ("rot", "rotplus")
ANGLE_STEP = 3  # 200 ms at dt = 1/14 s is 2.8 steps, rounded up


@dataclass
class Corpus:
    condition: str
    seed: int
    trajectories: list = field(default_factory=list)
    dt: float = 1.0 / 14.0

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


def generate_corpus(condition: str, n: int, rng: np.random.Generator, *, steps: int = 42,
                    geom: ArmGeometry = ArmGeometry(), episode: EpisodeConfig = EpisodeConfig(),
                    sampler: SamplerParams = SamplerParams(), seed: int = 0,
                    restart_fraction: float = 0.0, first_segment=None, segment_range=(8, 28)) -> Corpus:
    """``n`` random walks, each under a fresh transform and goal for ``condition``.

    Transforms, goals and walk actions come from independent children of
    ``rng``; equally seeded Rot and Rot+ corpora therefore share goals and
    action sequences and differ only in their transforms.

    A ``restart_fraction`` of the walks is cut into segments whose lengths
    are uniform on ``segment_range`` (``first_segment`` for the first one);
    the arm returns to its start pose at each cut while the transform stays
    fixed, as between test reaches.
    """
    if n < 1:
        raise ValueError("corpus size must be >= 1")
    if not 0.0 <= restart_fraction <= 1.0:
        raise ValueError("restart_fraction must lie in [0, 1]")
    draw = sampler_for(condition)
    transform_rng, goal_rng, action_rng, restart_rng = rng.spawn(4)
    trajectories = []
    for _ in range(n):
        transform = draw(transform_rng, sampler)
        task = TaskInstance(transform, sample_goal(goal_rng, episode), episode, geom)
        restarts = None
        if restart_fraction > 0 and restart_rng.random() < restart_fraction:
            restarts = restart_flags(steps, segment_range, restart_rng, first_segment)
        trajectories.append(random_walk(task, steps, action_rng, restarts))
    return Corpus(condition, seed, trajectories, geom.dt)


@dataclass
class TrialMetrics:
    cumulative_penalty: float
    angular_error_200ms: float  # degrees; nan when the cursor has not moved
    speeds: np.ndarray  # cm/s per executed step
    min_goal_distance: float
    reached: bool
    trajectory: np.ndarray  # cursor positions including the start
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.speeds)) if len(self.speeds) else 0.0

    @property
    def peak_speed(self) -> float:
        return float(np.max(self.speeds)) if len(self.speeds) else 0.0

    @property
    def steps(self) -> int:
        return len(self.trajectory) - 1

    @property
    def final_position(self) -> np.ndarray:
        return self.trajectory[-1]


def unsigned_angle(u, v) -> float:
    """Angle in degrees between two 2-vectors; nan if either is zero."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return math.nan
    cross = u[0] * v[1] - u[1] * v[0]
    return float(abs(np.degrees(np.arctan2(cross, np.dot(u, v)))))


def compute_metrics(trajectory, goal, dt: float, reached: bool = False,
                    angle_step: int = ANGLE_STEP) -> TrialMetrics:
    cursors = np.asarray(trajectory, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if len(cursors) == 0:
        raise ValueError("empty trajectory")
    dist = np.linalg.norm(cursors - goal, axis=1)
    k = min(angle_step, len(cursors) - 1)
    return TrialMetrics(
        cumulative_penalty=float(dist[1:].sum()),
        angular_error_200ms=unsigned_angle(cursors[k] - cursors[0], goal - cursors[0]),
        speeds=np.linalg.norm(np.diff(cursors, axis=0), axis=1) / dt,
        min_goal_distance=float(dist.min()),
        reached=bool(reached),
        trajectory=cursors,
        goal=goal,
    )


def normalize_trajectory(trajectory, rotation: float, goal) -> np.ndarray:
    """Rotate so the goal lies on +x and mirror negative-rotation blocks."""
    cursors = np.asarray(trajectory, dtype=float)
    phi = np.arctan2(goal[1], goal[0])
    c, s = np.cos(-phi), np.sin(-phi)
    out = cursors @ np.array([[c, -s], [s, c]]).T
    if rotation < 0:
        out = out * np.array([1.0, -1.0])
    return out


def run_reach(agent: CEMAgent, task: TaskInstance):
    """Drive one reach to termination; returns (cursors, reached)."""
    env = ReachEnv(task)
    obs = env.obs
    agent.start_reach(obs)
    cursors = [obs.cursor]
    while not env.done:
        record = env.step(agent.act(obs))
        obs = record.obs
        cursors.append(obs.cursor)
    return np.array(cursors), env.reached


def run_test_block(model, rotation_sign: int, n_reaches: int = 5, rng=None, *,
                   cem: CemConfig = CemConfig(), geom: ArmGeometry = ArmGeometry(),
                   episode: EpisodeConfig = EpisodeConfig(), rotation_deg: float = 60.0,
                   transform=None) -> list[TrialMetrics]:
    """One block of reaches under a fixed rotation; model memory spans the block.

    ``rng`` is split into a goal stream and a planning-noise stream, so two
    models given equally seeded generators face identical goals.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    goal_rng, plan_rng = rng.spawn(2)
    if transform is None:
        transform = pure_rotation(np.sign(rotation_sign) * rotation_deg)
    agent = CEMAgent.from_config(model, cem, geom.acc_limit, plan_rng)
    results = []
    for _ in range(n_reaches):
        task = TaskInstance(transform, sample_goal(goal_rng, episode), episode, geom)
        cursors, reached = run_reach(agent, task)
        results.append(compute_metrics(cursors, task.goal, geom.dt, reached))
    return results


def random_policy_baseline(n_episodes: int, rng: np.random.Generator, *,
                           geom: ArmGeometry = ArmGeometry(), episode: EpisodeConfig = EpisodeConfig(),
                           rotation_deg: float = 60.0, max_steps: int | None = None):
    """Cumulative penalty under uniform random actions in test-condition reaches.

    Returns ``(mean, stderr, per_episode_penalties)``.
    """
    steps = episode.max_steps if max_steps is None else max_steps
    penalties = np.zeros(n_episodes)
    for i in range(n_episodes):
        if steps == 0:
            continue
        sign = 1 if i % 2 == 0 else -1
        ep = EpisodeConfig(steps, episode.walk_steps, episode.dwell_steps, episode.goal_radius,
                           episode.goal_dist)
        env = ReachEnv(TaskInstance(pure_rotation(sign * rotation_deg), sample_goal(rng, ep), ep, geom))
        while not env.done:
            penalties[i] -= env.step(rng.uniform(-geom.acc_limit, geom.acc_limit, 2)).reward
    if n_episodes == 0:
        return math.nan, math.nan, penalties
    stderr = float(penalties.std(ddof=1) / np.sqrt(n_episodes)) if n_episodes > 1 else 0.0
    return float(penalties.mean()), stderr, penalties


def heldout_walks(n: int, rng: np.random.Generator, *, steps: int = 28,
                  geom: ArmGeometry = ArmGeometry(), episode: EpisodeConfig = EpisodeConfig(),
                  rotation_deg: float = 60.0) -> list[Trajectory]:
    """Random walks under alternating +/- rotations, for model-error curves."""
    walks = []
    for i in range(n):
        sign = 1 if i % 2 == 0 else -1
        task = TaskInstance(pure_rotation(sign * rotation_deg), sample_goal(rng, episode), episode, geom)
        walks.append(random_walk(task, steps, rng))
    return walks


def bootstrap_ci(values, n_resamples: int = 1000, confidence: float = 0.95, seed: int = 0):
    """Mean with a percentile-bootstrap interval; degenerate samples collapse to the mean."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return math.nan, math.nan, math.nan
    m = float(x.mean())
    if len(x) < 2 or np.all(x == x[0]):
        return m, m, m
    res = stats.bootstrap((x,), np.mean, n_resamples=n_resamples, confidence_level=confidence,
                          method="percentile", rng=np.random.default_rng(seed))
    return m, float(res.confidence_interval.low), float(res.confidence_interval.high)


METRIC_COLUMNS = ("cumulative_penalty", "angular_error_200ms", "mean_speed", "peak_speed",
                  "min_goal_distance", "reached", "steps")


def metrics_row(m: TrialMetrics, **keys) -> dict:
    row = dict(keys)
    for col in METRIC_COLUMNS:
        value = getattr(m, col)
        row[col] = int(value) if isinstance(value, (bool, np.bool_)) else value
    row["goal_x"], row["goal_y"] = (float(v) for v in m.goal)
    row["final_x"], row["final_y"] = (float(v) for v in m.final_position)
    return row


@dataclass
class ResultsTable:
    """Per-reach rows plus held-out model-error curves, keyed by condition and seed."""

    rows: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)
    model_errors: dict = field(default_factory=dict)

    def values(self, condition, metric, reach=None, seed=None):
        return np.array([
            r[metric] for r in self.rows
            if r["condition"] == condition
            and (reach is None or r["reach"] == reach)
            and (seed is None or r["seed"] == seed)
        ], dtype=float)

    def summary_rows(self, n_resamples: int = 1000):
        """One row per condition x seed x reach with block means and bootstrap CIs."""
        keys = sorted({(r["condition"], r["seed"], r["reach"]) for r in self.rows},
                      key=lambda k: (CONDITIONS.index(k[0]) if k[0] in CONDITIONS else 99, k[1], k[2]))
        out = []
        for cond, seed, reach in keys:
            row = {"condition": cond, "seed": seed, "reach": reach}
            for col in METRIC_COLUMNS:
                m, lo, hi = bootstrap_ci(self.values(cond, col, reach, seed), n_resamples)
                row[col], row[col + "_lo"], row[col + "_hi"] = m, lo, hi
            out.append(row)
        return out


def run_experiment(models: dict, *, n_blocks: int = 20, n_reaches: int = 5, root_seed: int = 0,
                   cem: CemConfig = CemConfig(), geom: ArmGeometry = ArmGeometry(),
                   episode: EpisodeConfig = EpisodeConfig(), rotation_deg: float = 60.0,
                   n_eval_walks: int = 20, keep_trajectories: bool = True) -> ResultsTable:
    """Evaluate every ``(condition, seed) -> model`` entry on shared goal/noise streams."""
    from .seeding import stream

    if not models:
        raise ValueError("no trained models supplied")
    table = ResultsTable()
    for (condition, seed), model in models.items():
        walks = heldout_walks(n_eval_walks, stream(root_seed, "eval-walks", seed), steps=episode.max_steps,
                              geom=geom, episode=episode, rotation_deg=rotation_deg)
        from .model import eval_model_error

        table.model_errors[(condition, seed)] = np.array([eval_model_error(model, w) for w in walks])
        for block in range(n_blocks):
            sign = 1 if block % 2 == 0 else -1
            trials = run_test_block(model, sign, n_reaches, stream(root_seed, "test-block", seed, block),
                                    cem=cem, geom=geom, episode=episode, rotation_deg=rotation_deg)
            for reach, m in enumerate(trials, start=1):
                keys = dict(condition=condition, seed=seed, block=block, reach=reach,
                            rotation=sign * rotation_deg)
                table.rows.append(metrics_row(m, **keys))
                if keep_trajectories:
                    table.trajectories.append((keys, m.trajectory))
    return table
