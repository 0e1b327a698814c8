"""Adaptive recurrent forward model and an exact oracle with the same interface.

The network reads ``(cursor, goal, action)`` and predicts the next cursor
displacement; its LSTM state is the memory that lets it identify the
current perturbation from action/outcome pairs. Reward is computed from the
predicted cursor, never learned.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .arm import ArmGeometry, initial_array, step_arrays
from .neural import (
    OptimizerState,
    TrainConfig,
    WeightSet,
    forward_pass,
    forward_sequence,
    init_weights,
    loss_and_gradients,
    optimizer_update,
)
from .seeding import stream
from .task import Observation, Trajectory, cursor_of

log = logging.getLogger(__name__)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelMemory:
    """Recurrent state plus the latest real observation. Immutable, so copies are free."""

    h: np.ndarray
    c: np.ndarray
    last_obs: Observation | None = None

    def __post_init__(self):
        object.__setattr__(self, "h", _frozen(self.h))
        object.__setattr__(self, "c", _frozen(self.c))

    def __eq__(self, other):
        return (
            isinstance(other, ModelMemory)
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.c, other.c)
            and self.last_obs == other.last_obs
        )


@dataclass
class TrainReport:
    loss_curve: list = field(default_factory=list)
    final_error_cm: float = float("nan")
    epochs_run: int = 0


def trajectory_arrays(trajectories, cursor_scale, action_scale, target_scale):
    """Time-major network inputs and normalised delta targets for equal-length walks."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("empty corpus")
    lengths = {tr.steps for tr in trajectories}
    if len(lengths) != 1:
        raise ValueError(f"trajectories must share a length, got {sorted(lengths)}")
    cursors = np.stack([tr.inputs for tr in trajectories], axis=1)  # (T, N, 2)
    actions = np.stack([tr.actions for tr in trajectories], axis=1)
    goals = np.stack([tr.goal for tr in trajectories], axis=0)
    T = actions.shape[0]
    xs = np.concatenate(
        [
            cursors / cursor_scale,
            np.broadcast_to(goals / cursor_scale, (T,) + goals.shape),
            actions / action_scale,
        ],
        axis=-1,
    )
    ys = np.stack([tr.deltas for tr in trajectories], axis=1) / target_scale
    return xs, ys


class RecurrentForwardModel(BaseEstimator):
    """LSTM forward model with an estimator-style ``fit``/``predict``/``score``.

    Parameters
    ----------
    hidden_size : int
        Width of the LSTM and of both ReLU layers.
    cursor_scale, action_scale, target_scale : float
        Fixed normalisation divisors for positions (cm), accelerations
        (rad/s^2) and predicted displacements (cm).
    learning_rate, beta1, beta2, eps, batch_size, epochs, clip_norm, patience
        Adam / minibatch settings, see :class:`reachlearn.neural.TrainConfig`.
    lr_decay : float
        Multiplicative learning-rate decay applied after every epoch.
    compute_dtype : str
        Precision of the BPTT pass during ``fit``; parameters and Adam
        moments stay float64, and inference always runs in float64.
    random_state : int
        Seed for weight initialisation and minibatch order.
    """

    def __init__(self, hidden_size=100, cursor_scale=10.0, action_scale=20.0, target_scale=5.0,
                 learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, batch_size=32,
                 epochs=40, clip_norm=5.0, patience=20, lr_decay=1.0, forget_bias=1.0,
                 compute_dtype="float32", random_state=0):
        self.hidden_size = hidden_size
        self.cursor_scale = cursor_scale
        self.action_scale = action_scale
        self.target_scale = target_scale
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.clip_norm = clip_norm
        self.patience = patience
        self.lr_decay = lr_decay
        self.forget_bias = forget_bias
        self.compute_dtype = compute_dtype
        self.random_state = random_state

    # -- training -------------------------------------------------------
    def _train_config(self, lr=None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate if lr is None else lr,
            beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            batch_size=self.batch_size, epochs=self.epochs, clip_norm=self.clip_norm,
            patience=self.patience, seed=self.random_state,
        )

    def _arrays(self, trajectories):
        return trajectory_arrays(trajectories, self.cursor_scale, self.action_scale, self.target_scale)

    def fit(self, corpus, y=None, weights: WeightSet | None = None):
        """Train by BPTT on whole trajectories, each starting from zero memory."""
        trajectories = list(getattr(corpus, "trajectories", corpus))
        xs, ys = self._arrays(trajectories)
        cfg = self._train_config()
        rng = stream(self.random_state, "batch-order")
        w = weights.copy() if weights is not None else init_weights(
            xs.shape[-1], self.hidden_size, 2, stream(self.random_state, "weight-init"),
            self.forget_bias,
        )
        opt = OptimizerState.fresh(w)
        n = xs.shape[1]
        report = TrainReport()
        best, stale, lr = np.inf, 0, self.learning_rate
        dtype = np.dtype(self.compute_dtype)
        for epoch in range(self.epochs):
            step_cfg = self._train_config(lr)
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, grads = loss_and_gradients(w, xs[:, idx], ys[:, idx], dtype)
                w, opt = optimizer_update(w, grads, opt, step_cfg)
                total += loss * len(idx)
            epoch_loss = total / n
            report.loss_curve.append(epoch_loss)
            report.epochs_run = epoch + 1
            if not np.isfinite(epoch_loss):
                raise FloatingPointError(f"training diverged at epoch {epoch}")
            if epoch_loss < best * (1 - 1e-4):
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.info("plateau after %d epochs", epoch + 1)
                    break
            lr *= self.lr_decay
        self.weights_ = w
        self.n_features_in_ = xs.shape[-1]
        self.train_report_ = report
        self.train_report_.final_error_cm = float(np.mean(self._step_errors(xs, ys)))
        self.metadata_ = {
            "condition": getattr(corpus, "condition", None),
            "corpus_size": len(trajectories),
            "seed": int(self.random_state),
            "train_error_cm": self.train_report_.final_error_cm,
            "epochs_run": report.epochs_run,
        }
        return self

    def _step_errors(self, xs, ys):
        preds = forward_sequence(self.weights_, xs)
        return np.linalg.norm(preds - ys, axis=-1) * self.target_scale

    # -- estimator surface ---------------------------------------------
    def predict(self, trajectories):
        """One-step-ahead cursor predictions, teacher-forced, one array per trajectory."""
        check_is_fitted(self, "weights_")
        out = []
        for tr in trajectories:
            xs, _ = self._arrays([tr])
            deltas = forward_sequence(self.weights_, xs)[:, 0] * self.target_scale
            out.append(tr.inputs + deltas)
        return out

    def score(self, trajectories, y=None):
        """Negative mean per-step cursor error (cm); higher is better."""
        check_is_fitted(self, "weights_")
        return -float(np.mean(np.concatenate([eval_model_error(self, tr) for tr in trajectories])))

    # -- memory interface used by the planner ----------------------------
    def reset_memory(self) -> ModelMemory:
        check_is_fitted(self, "weights_")
        H = self.weights_.hidden
        return ModelMemory(np.zeros(H), np.zeros(H), None)

    def new_reach(self, mem: ModelMemory, obs: Observation) -> ModelMemory:
        """Start a reach in the same block: recurrent state carries over."""
        return ModelMemory(mem.h, mem.c, obs)

    def _inputs(self, cursors, goal, actions):
        goal = np.broadcast_to(np.asarray(goal, float) / self.cursor_scale, np.shape(cursors))
        return np.concatenate(
            [np.asarray(cursors) / self.cursor_scale, goal, np.asarray(actions) / self.action_scale],
            axis=-1,
        )

    def observe(self, mem: ModelMemory, obs: Observation, action):
        x = self._inputs(obs.cursor, obs.goal, np.asarray(action, float))
        delta, h, c = forward_pass(self.weights_, x, mem.h, mem.c)
        pred = obs.cursor + delta * self.target_scale
        reward = -float(np.linalg.norm(pred - obs.goal))
        return ModelMemory(h, c, obs), pred, reward

    def rollout_rewards(self, mem: ModelMemory, start_obs: Observation, actions) -> np.ndarray:
        """Summed predicted reward for each of ``P`` open-loop action sequences (P, H, 2)."""
        actions = np.asarray(actions, dtype=float)
        P, horizon, _ = actions.shape
        cursor = np.broadcast_to(start_obs.cursor, (P, 2)).copy()
        h = np.broadcast_to(mem.h, (P, mem.h.size))
        c = np.broadcast_to(mem.c, (P, mem.c.size))
        total = np.zeros(P)
        for t in range(horizon):
            x = self._inputs(cursor, start_obs.goal, actions[:, t])
            delta, h, c = forward_pass(self.weights_, x, h, c)
            cursor = cursor + delta * self.target_scale
            total -= np.linalg.norm(cursor - start_obs.goal, axis=-1)
        return total


class OracleArmModel:
    """Exact model: dead-reckons the arm from actions and knows the true transform."""

    def __init__(self, transform, geom: ArmGeometry = ArmGeometry()):
        self.transform = transform
        self.geom = geom

    def reset_memory(self):
        return _OracleMemory(_frozen(initial_array(self.geom)), None)

    def new_reach(self, mem, obs):
        return _OracleMemory(_frozen(initial_array(self.geom)), obs)

    def observe(self, mem, obs, action):
        state = step_arrays(mem.state, action, self.geom)
        pred = cursor_of(state, self.transform, self.geom)
        return _OracleMemory(_frozen(state), obs), pred, -float(np.linalg.norm(pred - obs.goal))

    def rollout_rewards(self, mem, start_obs, actions):
        actions = np.asarray(actions, dtype=float)
        state = np.broadcast_to(mem.state, (actions.shape[0], 4))
        total = np.zeros(actions.shape[0])
        for t in range(actions.shape[1]):
            state = step_arrays(state, actions[:, t], self.geom)
            total -= np.linalg.norm(cursor_of(state, self.transform, self.geom) - start_obs.goal, axis=-1)
        return total


@dataclass(frozen=True)
class _OracleMemory:
    state: np.ndarray
    last_obs: Observation | None

    def __eq__(self, other):
        return isinstance(other, _OracleMemory) and np.array_equal(self.state, other.state) \
            and self.last_obs == other.last_obs


# -- functional surface -----------------------------------------------------
def memory_reset(model) -> ModelMemory:
    return model.reset_memory()


def model_observe(model, mem, obs: Observation, action):
    """Advance memory with a real (or simulated) step: ``(mem', next_cursor, reward)``."""
    return model.observe(mem, obs, action)


def simulate(model, mem_snapshot, start_obs: Observation, actions) -> float:
    """Total predicted reward of one open-loop action sequence.

    The snapshot is never modified, so the caller's memory is exactly what it
    was before the call.
    """
    actions = np.asarray(actions, dtype=float).reshape(-1, 2)
    if len(actions) == 0:
        return 0.0
    return float(model.rollout_rewards(mem_snapshot, start_obs, actions[None])[0])


def train_model(corpus, **params) -> RecurrentForwardModel:
    return RecurrentForwardModel(**params).fit(corpus)


def eval_model_error(model, trajectory: Trajectory) -> np.ndarray:
    """Per-step distance between predicted and actual next cursor, from zero memory."""
    mem = model.reset_memory()
    errors = np.empty(trajectory.steps)
    inputs = trajectory.inputs
    for t in range(trajectory.steps):
        obs = Observation(inputs[t], trajectory.goal)
        mem, pred, _ = model.observe(mem, obs, trajectory.actions[t])
        errors[t] = np.linalg.norm(pred - trajectory.cursors[t + 1])
    return errors


def open_loop_error(model, trajectory: Trajectory, start: int, k: int) -> float:
    """Cursor error after ``k`` open-loop steps launched at step ``start``.

    Memory is warmed on the real trajectory up to ``start``; afterwards the
    model's own predictions are fed back.
    """
    mem = model.reset_memory()
    inputs = trajectory.inputs
    for t in range(start):
        mem, _, _ = model.observe(mem, Observation(inputs[t], trajectory.goal), trajectory.actions[t])
    obs = Observation(inputs[start], trajectory.goal)
    for t in range(start, start + k):
        if trajectory.restarts[t] and t > start:
            obs = Observation(np.zeros(2), trajectory.goal)
        mem, pred, _ = model.observe(mem, obs, trajectory.actions[t])
        obs = Observation(pred, trajectory.goal)
    return float(np.linalg.norm(obs.cursor - trajectory.cursors[start + k]))
