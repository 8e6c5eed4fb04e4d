"""Simulation state containers and quaternion helpers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError

BASE_DIM = 13  # p(3) quat(4) v(3) omega(3)
P, QUAT, V, OMEGA = slice(0, 3), slice(3, 7), slice(7, 10), slice(10, 13)


def state_dim(n_joints: int) -> int:
    return BASE_DIM + 2 * n_joints


def tangent_dim(n_joints: int) -> int:
    return 12 + 2 * n_joints


@dataclass(frozen=True)
class SimState:
    """Floating-base pose/twist plus joint positions and velocities."""

    p: np.ndarray
    quat: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    q_jnt: np.ndarray
    dq_jnt: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("p", "quat", "v", "omega", "q_jnt", "dq_jnt"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        object.__setattr__(self, "t", float(self.t))
        if self.p.size != 3 or self.v.size != 3 or self.omega.size != 3 or self.quat.size != 4:
            raise InvalidArgumentError("malformed base state")
        if self.q_jnt.size != self.dq_jnt.size:
            raise InvalidArgumentError("joint position/velocity size mismatch")

    @property
    def n_joints(self) -> int:
        return self.q_jnt.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.quat, self.v, self.omega, self.q_jnt, self.dq_jnt])

    @classmethod
    def from_vector(cls, x, t: float = 0.0) -> "SimState":
        x = np.asarray(x, dtype=float)
        n = (x.size - BASE_DIM) // 2
        return cls(x[P], x[QUAT], x[V], x[OMEGA], x[BASE_DIM:BASE_DIM + n], x[BASE_DIM + n:], t)

    @classmethod
    def planar(cls, x=0.0, z=0.0, pitch=0.0, vx=0.0, vz=0.0, wy=0.0, q=(), dq=None, t=0.0):
        q = np.asarray(q, dtype=float)
        dq = np.zeros_like(q) if dq is None else dq
        return cls([x, 0.0, z], pitch_quat(pitch), [vx, 0.0, vz], [0.0, wy, 0.0], q, dq, t)

    @property
    def pitch(self) -> float:
        return float(2.0 * np.arctan2(self.quat[2], self.quat[0]))

    def first_nonfinite(self):
        for name in ("p", "quat", "v", "omega", "q_jnt", "dq_jnt"):
            if not np.all(np.isfinite(getattr(self, name))):
                return name
        if not np.isfinite(self.t):
            return "t"
        return None


def field_of_index(i: int, n_joints: int) -> str:
    names = ["p"] * 3 + ["quat"] * 4 + ["v"] * 3 + ["omega"] * 3 + ["q_jnt"] * n_joints + ["dq_jnt"] * n_joints
    return names[i]


@dataclass(frozen=True)
class ControlInput:
    q_target: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        a = np.array(self.q_target, dtype=float).reshape(-1)
        a.flags.writeable = False
        object.__setattr__(self, "q_target", a)


# ----------------------------------------------------------------- quaternions


def pitch_quat(pitch: float) -> np.ndarray:
    return np.array([np.cos(0.5 * pitch), 0.0, np.sin(0.5 * pitch), 0.0])


def quat_mul(a, b):
    aw, ax, ay, az = np.moveaxis(np.asarray(a), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_log(q):
    """Rotation vector of a unit quaternion, taking the short way round."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0.0, -q, q)
    vec = q[..., 1:]
    s = np.linalg.norm(vec, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(s, q[..., :1])
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(s > 1e-12, angle / np.where(s > 1e-12, s, 1.0), 2.0)
    return vec * scale


def quat_exp(rv):
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv, axis=-1, keepdims=True)
    half = 0.5 * angle
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(angle > 1e-12, np.sin(half) / np.where(angle > 1e-12, angle, 1.0), 0.5)
    return np.concatenate([np.cos(half), rv * k], axis=-1)


def tangent_difference(xa, xb, n_joints: int) -> np.ndarray:
    """``xa - xb`` on the state manifold.

    Orientation rows are the rotation vector of ``q_b^-1 q_a``; all other
    components subtract directly.  Works on stacked states (leading axes).
    """
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    rot = quat_log(quat_mul(quat_conj(xb[..., QUAT]), xa[..., QUAT]))
    return np.concatenate([
        xa[..., P] - xb[..., P],
        rot,
        xa[..., 7:] - xb[..., 7:],
    ], axis=-1)
