"""Two-link planar arm driven by joint accelerations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised when a state or action is outside the simulator's domain."""


@dataclass(frozen=True)
class ArmGeometry:
    upper_len: float = 30.0
    fore_len: float = 35.0
    vel_limit: float = 4.0
    acc_limit: float = 20.0
    dt: float = 1.0 / 14.0
    initial_pose: tuple[float, float] = field(
        default=(float(np.deg2rad(120.0)), float(np.deg2rad(-90.0)))
    )

    def __post_init__(self):
        for name in ("upper_len", "fore_len", "vel_limit", "acc_limit", "dt"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if len(self.initial_pose) != 2 or not np.all(np.isfinite(self.initial_pose)):
            raise DomainError("initial_pose must be two finite angles")
        object.__setattr__(self, "initial_pose", tuple(float(a) for a in self.initial_pose))

    def steps_for(self, seconds: float) -> int:
        """Number of whole simulation steps covering ``seconds``."""
        return int(round(seconds / self.dt))

    @property
    def reach(self) -> float:
        return self.upper_len + self.fore_len


@dataclass(frozen=True)
class ArmState:
    shoulder_angle: float
    elbow_angle: float
    shoulder_vel: float = 0.0
    elbow_vel: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.shoulder_angle, self.elbow_angle, self.shoulder_vel, self.elbow_vel]
        )

    @classmethod
    def from_array(cls, a) -> "ArmState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class Action:
    shoulder_acc: float
    elbow_acc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.shoulder_acc, self.elbow_acc])


def clamp_action(action, geom: ArmGeometry) -> np.ndarray:
    return np.clip(np.asarray(action, dtype=float), -geom.acc_limit, geom.acc_limit)


def step_arrays(states: np.ndarray, actions: np.ndarray, geom: ArmGeometry) -> np.ndarray:
    """Vectorised semi-implicit Euler step.

    ``states`` has shape (..., 4) laid out as (q1, q2, dq1, dq2) and
    ``actions`` has shape (..., 2). Velocity is updated first and clamped,
    then angles advance with the new velocity.
    """
    states = np.asarray(states, dtype=float)
    acc = clamp_action(actions, geom)
    vel = np.clip(states[..., 2:] + acc * geom.dt, -geom.vel_limit, geom.vel_limit)
    ang = states[..., :2] + vel * geom.dt
    return np.concatenate([ang, vel], axis=-1)


def tip_arrays(states: np.ndarray, geom: ArmGeometry) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    q1 = states[..., 0]
    q12 = q1 + states[..., 1]
    x = geom.upper_len * np.cos(q1) + geom.fore_len * np.cos(q12)
    y = geom.upper_len * np.sin(q1) + geom.fore_len * np.sin(q12)
    return np.stack([x, y], axis=-1)


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise DomainError(f"non-finite {what}: {values!r}")


def step_arm(state: ArmState, action: Action, geom: ArmGeometry) -> ArmState:
    s = state.as_array()
    a = action.as_array() if isinstance(action, Action) else np.asarray(action, float)
    _check_finite(s, "state")
    _check_finite(a, "action")
    return ArmState.from_array(step_arrays(s, a, geom))


def tip_position(state: ArmState, geom: ArmGeometry) -> np.ndarray:
    """Cartesian position (cm) of the arm's tip; the elbow angle is relative."""
    s = state.as_array()
    _check_finite(s, "state")
    return tip_arrays(s, geom)


def initial_state(geom: ArmGeometry) -> ArmState:
    return ArmState(geom.initial_pose[0], geom.initial_pose[1], 0.0, 0.0)


def initial_array(geom: ArmGeometry) -> np.ndarray:
    return initial_state(geom).as_array()


def reference_tip(geom: ArmGeometry) -> np.ndarray:
    """Tip position at the start pose; the cursor origin maps to this point."""
    return tip_arrays(initial_array(geom), geom)
