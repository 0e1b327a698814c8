"""Linear visuomotor perturbations and the two training-condition samplers.

A transform is built as ``R(rotation) @ Shear(shear) @ Scale(sx, sy)`` with
``Shear = [[1, s], [0, 1]]``. Because ``Shear @ Scale`` is upper triangular
with a positive diagonal, a QR factorisation recovers every component.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TransformSpec:
    rotation: float = 0.0  # degrees
    shear: float = 0.0
    scale_x: float = 1.0
    scale_y: float = 1.0

    def __post_init__(self):
        vals = (self.rotation, self.shear, self.scale_x, self.scale_y)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite transform spec {vals!r}")
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError(f"scales must be positive, got {self.scale_x}, {self.scale_y}")

    @property
    def is_pure_rotation(self) -> bool:
        return self.shear == 0.0 and self.scale_x == 1.0 and self.scale_y == 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.rotation, self.shear, self.scale_x, self.scale_y])


@dataclass(frozen=True)
class LinearTransform:
    m: np.ndarray = field(repr=False)
    spec: TransformSpec

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.m))

    def __eq__(self, other):
        return isinstance(other, LinearTransform) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)


def rotation_matrix(degrees: float) -> np.ndarray:
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def compose(spec: TransformSpec) -> LinearTransform:
    shear = np.array([[1.0, spec.shear], [0.0, 1.0]])
    scale = np.diag([spec.scale_x, spec.scale_y])
    m = rotation_matrix(spec.rotation) @ shear @ scale
    m.setflags(write=False)
    return LinearTransform(m, spec)


def identity() -> LinearTransform:
    return compose(TransformSpec())


def pure_rotation(degrees: float) -> LinearTransform:
    return compose(TransformSpec(rotation=float(degrees)))


def apply(t: LinearTransform, p) -> np.ndarray:
    """Map point(s) of shape (..., 2) through the transform."""
    return np.asarray(p, dtype=float) @ t.m.T


def decompose(m) -> TransformSpec:
    """Recover (rotation, shear, scales) from a matrix built by :func:`compose`."""
    m = np.asarray(m, dtype=float)
    if np.linalg.det(m) <= 0:
        raise ValueError("only orientation-preserving transforms can be decomposed")
    q, r = np.linalg.qr(m)
    signs = np.sign(np.diag(r))
    q = q * signs
    r = signs[:, None] * r
    rotation = float(np.rad2deg(np.arctan2(q[1, 0], q[0, 0])))
    return TransformSpec(rotation, float(r[0, 1] / r[1, 1]), float(r[0, 0]), float(r[1, 1]))


@dataclass(frozen=True)
class SamplerParams:
    rotation_range: tuple[float, float] = (-180.0, 180.0)
    shear_range: tuple[float, float] = (-0.5, 0.5)
    scale_range: tuple[float, float] = (0.77, 2.2)  # log-uniform
    substitution_band: tuple[float, float] = (50.0, 70.0)
    substitution_angle: float = 60.0

    def __post_init__(self):
        lo, hi = self.rotation_range
        if not lo < hi:
            raise ValueError("rotation_range must be increasing")
        if not self.shear_range[0] <= self.shear_range[1]:
            raise ValueError("shear_range must be non-decreasing")
        if not 0 < self.scale_range[0] <= self.scale_range[1]:
            raise ValueError("scale_range must be positive and non-decreasing")
        for name in ("rotation_range", "shear_range", "scale_range", "substitution_band"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))


def sample_rot(rng: np.random.Generator, params: SamplerParams = SamplerParams()) -> LinearTransform:
    return pure_rotation(float(rng.uniform(*params.rotation_range)))


def rotplus_from_draw(rotation, shear, scale_x, scale_y, params=SamplerParams()) -> LinearTransform:
    """Build a Rot+ transform from raw draws, applying the substitution rule.

    Rotations whose magnitude falls strictly inside the substitution band
    are replaced by a pure rotation of ``sign * substitution_angle``.
    """
    lo, hi = params.substitution_band
    if lo < abs(rotation) < hi:
        return pure_rotation(float(np.sign(rotation)) * params.substitution_angle)
    return compose(TransformSpec(float(rotation), float(shear), float(scale_x), float(scale_y)))


def sample_rotplus(rng: np.random.Generator, params: SamplerParams = SamplerParams()) -> LinearTransform:
    # all four values are always drawn so the stream stays aligned
    rotation = rng.uniform(*params.rotation_range)
    shear = rng.uniform(*params.shear_range)
    log_lo, log_hi = np.log(params.scale_range)
    sx, sy = np.exp(rng.uniform(log_lo, log_hi, size=2))
    return rotplus_from_draw(rotation, shear, sx, sy, params)


SAMPLERS = {"rot": sample_rot, "rotplus": sample_rotplus}


def sampler_for(condition: str):
    try:
        return SAMPLERS[condition]
    except KeyError:
        raise ValueError(f"unknown condition {condition!r}; expected one of {sorted(SAMPLERS)}") from None
