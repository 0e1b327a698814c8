"""Reaching environment: cursor observations, distance reward, dwell termination."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arm import ArmGeometry, clamp_action, initial_array, reference_tip, step_arrays, tip_arrays
from .transforms import LinearTransform, identity


class EpisodeFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 28
    walk_steps: int = 42
    dwell_steps: int = 7
    goal_radius: float = 1.6
    goal_dist: float = 8.0

    def __post_init__(self):
        if min(self.max_steps, self.walk_steps, self.dwell_steps) < 1:
            raise ValueError("step counts must be >= 1")
        if self.goal_radius <= 0 or self.goal_dist <= 0:
            raise ValueError("goal_radius and goal_dist must be positive")


@dataclass(frozen=True)
class Observation:
    cursor: np.ndarray
    goal: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.cursor, self.goal])

    def __eq__(self, other):
        return (
            isinstance(other, Observation)
            and np.array_equal(self.cursor, other.cursor)
            and np.array_equal(self.goal, other.goal)
        )


@dataclass(frozen=True)
class StepRecord:
    obs: Observation
    action: np.ndarray
    reward: float
    done: bool
    dwell_count: int


@dataclass(frozen=True)
class TaskInstance:
    transform: LinearTransform
    goal: np.ndarray
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    geom: ArmGeometry = field(default_factory=ArmGeometry)


@dataclass
class Trajectory:
    """A recorded rollout: ``cursors`` has one more row than ``actions``.

    ``restarts[t]`` marks a step whose action is applied after the arm was
    put back in its start pose, so its input cursor is the origin while
    ``cursors[t]`` keeps where the previous segment ended.
    """

    cursors: np.ndarray
    actions: np.ndarray
    goal: np.ndarray
    transform: LinearTransform | None = None
    restarts: np.ndarray | None = None

    def __post_init__(self):
        self.cursors = np.asarray(self.cursors, dtype=float)
        self.actions = np.asarray(self.actions, dtype=float).reshape(-1, 2)
        self.goal = np.asarray(self.goal, dtype=float)
        if len(self.cursors) != len(self.actions) + 1:
            raise ValueError(
                f"expected {len(self.actions) + 1} cursor rows, got {len(self.cursors)}"
            )
        if self.restarts is None:
            self.restarts = np.zeros(len(self.actions), dtype=bool)
        self.restarts = np.asarray(self.restarts, dtype=bool).reshape(-1)
        if len(self.restarts) != len(self.actions):
            raise ValueError(f"expected {len(self.actions)} restart flags, got {len(self.restarts)}")
        if self.restarts.any() and self.restarts[0]:
            raise ValueError("step 0 always starts from the start pose; restarts[0] must be False")

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def inputs(self) -> np.ndarray:
        """Cursor each action is applied from."""
        out = self.cursors[:-1].copy()
        out[self.restarts] = 0.0
        return out

    @property
    def deltas(self) -> np.ndarray:
        return self.cursors[1:] - self.inputs


def goal_from_angle(angle: float, config: EpisodeConfig = EpisodeConfig()) -> np.ndarray:
    return config.goal_dist * np.array([np.cos(angle), np.sin(angle)])


def sample_goal(rng: np.random.Generator, config: EpisodeConfig = EpisodeConfig()) -> np.ndarray:
    return goal_from_angle(rng.uniform(0.0, 2 * np.pi), config)


def cursor_of(states: np.ndarray, transform: LinearTransform, geom: ArmGeometry) -> np.ndarray:
    return (tip_arrays(states, geom) - reference_tip(geom)) @ transform.m.T


def observe(arm, task: TaskInstance) -> Observation:
    """Cursor = transform applied to the tip's displacement from the start pose."""
    states = arm.as_array() if hasattr(arm, "as_array") else np.asarray(arm, float)
    return Observation(cursor_of(states, task.transform, task.geom), np.array(task.goal, float))


def reward_of(cursor, goal) -> float:
    return -float(np.linalg.norm(np.asarray(cursor) - np.asarray(goal)))


class ReachEnv:
    """Single-reach episode. The arm state is private; only cursor/goal leak out."""

    def __init__(self, task: TaskInstance):
        self.task = task
        self.reset()

    def reset(self) -> Observation:
        self._state = initial_array(self.task.geom)
        self.t = 0
        self.dwell_count = 0
        self.done = False
        self.obs = observe(self._state, self.task)
        return self.obs

    def step(self, action) -> StepRecord:
        if self.done:
            raise EpisodeFinished("episode already finished; call reset()")
        ep = self.task.episode
        action = clamp_action(action, self.task.geom)
        self._state = step_arrays(self._state, action, self.task.geom)
        self.t += 1
        self.obs = observe(self._state, self.task)
        reward = reward_of(self.obs.cursor, self.obs.goal)
        if -reward <= ep.goal_radius:
            self.dwell_count += 1
        else:
            self.dwell_count = 0
        self.done = self.dwell_count >= ep.dwell_steps or self.t >= ep.max_steps
        return StepRecord(self.obs, action, reward, self.done, self.dwell_count)

    @property
    def reached(self) -> bool:
        return self.dwell_count >= self.task.episode.dwell_steps


def env_step(env: ReachEnv, action) -> StepRecord:
    return env.step(action)


def replay(actions, transform: LinearTransform, geom: ArmGeometry = ArmGeometry(),
           restarts=None) -> np.ndarray:
    """Cursor sequence produced by an action sequence from the start pose.

    With ``restarts``, the arm returns to the start pose before each flagged
    step; the returned row at that index is where the previous segment ended.
    """
    actions = np.asarray(actions, float).reshape(-1, 2)
    flags = np.zeros(len(actions), bool) if restarts is None else np.asarray(restarts, bool)
    start = initial_array(geom)
    state = start
    out = [state]
    for a, restart in zip(actions, flags):
        state = step_arrays(start if restart else state, a, geom)
        out.append(state)
    return cursor_of(np.array(out), transform, geom)


def restart_flags(steps: int, segment_range, rng: np.random.Generator, first_segment=None) -> np.ndarray:
    """Cut ``steps`` into segments with lengths uniform on ``segment_range`` (inclusive).

    ``first_segment`` gives the first cut its own range.
    """
    lo, hi = segment_range
    flo, fhi = segment_range if first_segment is None else first_segment
    if not (1 <= lo <= hi and 1 <= flo <= fhi):
        raise ValueError(f"segment ranges must satisfy 1 <= lo <= hi, got {segment_range}, {first_segment}")
    flags = np.zeros(steps, dtype=bool)
    t = int(rng.integers(flo, fhi + 1))
    while t < steps:
        flags[t] = True
        t += int(rng.integers(lo, hi + 1))
    return flags


def random_walk(task: TaskInstance, steps: int, rng: np.random.Generator, restarts=None) -> Trajectory:
    """I.i.d. uniform accelerations over the action box; dwell is ignored."""
    lim = task.geom.acc_limit
    actions = rng.uniform(-lim, lim, size=(steps, 2))
    cursors = replay(actions, task.transform, task.geom, restarts)
    return Trajectory(cursors, actions, task.goal, task.transform, restarts)


def default_task(goal=(8.0, 0.0), transform=None) -> TaskInstance:
    return TaskInstance(transform or identity(), np.asarray(goal, float))
