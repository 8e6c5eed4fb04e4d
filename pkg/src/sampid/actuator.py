"""PD position control and torque-saturation motor models."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError


class MotorModelKind(str, Enum):
    IDEAL = "ideal"
    LINEAR_GAIN = "linear_gain"
    UNIFIED_TANH = "unified_tanh"
    GROUPED_TANH = "grouped_tanh"

    @property
    def code(self) -> int:
        return _CODES[self]

    def n_gains(self, n_groups: int) -> int:
        """Number of identifiable gains this variant carries."""
        if self is MotorModelKind.IDEAL:
            return 0
        if self is MotorModelKind.GROUPED_TANH:
            return n_groups
        return 1

    @classmethod
    def parse(cls, value) -> "MotorModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            raise ConfigurationError(f"unknown motor model {value!r}") from None


_CODES = {
    MotorModelKind.IDEAL: 0,
    MotorModelKind.LINEAR_GAIN: 1,
    MotorModelKind.UNIFIED_TANH: 2,
    MotorModelKind.GROUPED_TANH: 3,
}


@dataclass(frozen=True)
class PdGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        if kp.shape != kd.shape:
            raise InvalidArgumentError("kp and kd must have the same shape")
        if np.any(kp < 0) or np.any(kd < 0):
            raise InvalidArgumentError("PD gains must be non-negative")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


@dataclass(frozen=True)
class SaturationGains:
    """Per-group gains ``kappa`` and the joint -> group assignment."""

    kappa: np.ndarray
    group_map: tuple

    def __post_init__(self):
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "group_map", tuple(int(g) for g in self.group_map))

    def per_joint(self, n_joints: int) -> np.ndarray:
        if len(self.group_map) != n_joints:
            raise ConfigurationError(
                f"group map covers {len(self.group_map)} joints, expected {n_joints}"
            )
        idx = np.asarray(self.group_map, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= self.kappa.size):
            raise ConfigurationError("joint assigned to a group without a gain")
        return self.kappa[idx]


def pd_torque(q_target, q, dq, gains: PdGains) -> np.ndarray:
    q_target, q, dq = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (q_target, q, dq))
    if not (q_target.shape == q.shape == dq.shape):
        raise InvalidArgumentError(
            f"dimension mismatch: q_target {q_target.shape}, q {q.shape}, dq {dq.shape}"
        )
    kp = np.broadcast_to(gains.kp, q.shape) if gains.kp.size == 1 else gains.kp
    kd = np.broadcast_to(gains.kd, q.shape) if gains.kd.size == 1 else gains.kd
    if kp.shape != q.shape:
        raise InvalidArgumentError(f"gain dimension {kp.shape} does not match joints {q.shape}")
    return kp * (q_target - q) - kd * dq


def apply_motor_model(tau_pd, kind, sat: SaturationGains | None = None) -> np.ndarray:
    """Map PD-commanded torque to the torque the actuator delivers.

    ``unified_tanh`` and ``linear_gain`` use ``sat.kappa[0]`` for every joint;
    ``grouped_tanh`` looks each joint's gain up through ``sat.group_map``.
    """
    kind = MotorModelKind.parse(kind)
    tau = np.atleast_1d(np.asarray(tau_pd, dtype=float))
    if kind is MotorModelKind.IDEAL:
        return tau.copy()
    if sat is None or sat.kappa.size == 0:
        raise ConfigurationError(f"motor model {kind.value} needs saturation gains")
    if kind is MotorModelKind.LINEAR_GAIN:
        return sat.kappa[0] * tau
    if kind is MotorModelKind.UNIFIED_TANH:
        k = sat.kappa[0]
    else:
        k = sat.per_joint(tau.size)
    if np.any(np.asarray(k) <= 0):
        raise InvalidArgumentError("tanh saturation gains must be positive")
    return k * np.tanh(tau / k)


def clip_torque(tau, limit) -> np.ndarray:
    return np.clip(tau, -limit, limit)
