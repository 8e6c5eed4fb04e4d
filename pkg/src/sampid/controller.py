"""Command-conditioned gait controller standing in for a learned locomotion
policy.

The controller maps a 14-channel command to joint position targets.  For the
planar quadruped it runs a phase oscillator at the commanded stepping
frequency; each planar leg represents a left/right pair, so ``b1`` (pair
offset) blends the pair's swing profiles and ``b2`` offsets the rear leg
against the front.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .dynamics.kernels import KIND_LINEAR_1D, KIND_PLANAR_QUADRUPED
from .dynamics.models import ModelDescriptor
from .dynamics.state import ControlInput, SimState
from .errors import ConfigurationError, InvalidArgumentError

COMMAND_CHANNELS = ("vx", "vy", "wz", "h", "f", "b1", "b2", "b3", "b4", "hf", "roll", "pitch", "sw", "sl")

# (b1, b2) for pace, trot, bound, pronk
GAITS = ((0.5, 0.5), (0.5, 0.0), (0.0, 0.5), (0.0, 0.0))
GAIT_NAMES = ("pace", "trot", "bound", "pronk")


@dataclass(frozen=True)
class CommandVector:
    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0
    h: float = 0.28
    f: float = 3.0
    b1: float = 0.5
    b2: float = 0.0
    b3: float = 0.0
    b4: float = 0.5
    hf: float = 0.06
    roll: float = 0.0
    pitch: float = 0.0
    sw: float = 0.25
    sl: float = 0.45

    def __post_init__(self):
        if not self.f > 0:
            raise InvalidArgumentError("stepping frequency must be positive")
        if not (self.h > 0 and self.hf > 0):
            raise InvalidArgumentError("body and swing heights must be positive")
        for b in (self.b1, self.b2, self.b3, self.b4):
            if not 0.0 <= b <= 1.0:
                raise InvalidArgumentError("gait offsets must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in COMMAND_CHANNELS])

    @classmethod
    def from_array(cls, a) -> "CommandVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (14,):
            raise InvalidArgumentError("command vector has 14 channels")
        return cls(**{k: float(v) for k, v in zip(COMMAND_CHANNELS, a)})

    def replace(self, **kw) -> "CommandVector":
        return replace(self, **kw)

    def with_gait(self, index: int) -> "CommandVector":
        b1, b2 = GAITS[index]
        return replace(self, b1=b1, b2=b2)


@dataclass(frozen=True)
class GaitControllerConfig:
    """Tuning of the scripted gait generator.

    ``duty`` falls back to the command's ``b4`` when None.  The default of
    0.75 keeps both lumped feet loaded long enough for the two-leg planar
    body to survive the in-phase gaits.
    """

    duty: float | None = 0.75
    raibert_gain: float = 0.05
    velocity_gain: float = 1.0
    # compensates the stance-sweep lag of the compliant PD joints
    stride_gain: float = 2.0
    leg_pitch_gain: float = 0.0
    pitch_gain: float = 8.0  # N m / rad
    pitch_damping: float = 3.0  # N m s / rad
    height_gain: float = 40.0  # (m/s^2) / m
    height_damping: float = 5.0  # (m/s^2) / (m/s)
    speed_force_gain: float = 5.0  # (m/s^2) / (m/s)
    feedforward_mass: float = 6.921
    max_stride: float = 0.2
    nominal_foot_x: float = 0.0

    def __post_init__(self):
        if self.duty is not None and not 0.0 < self.duty < 1.0:
            raise ConfigurationError("duty factor must lie in (0, 1)")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _swing_lift(psi, duty):
    s = (psi - duty) / (1.0 - duty)
    return np.where(psi >= duty, 0.5 * (1.0 - np.cos(2.0 * np.pi * s)), 0.0)


def leg_ik(x, z, l1, l2):
    """Hip/knee angles (knee bent backwards) placing the foot at ``(x, z)``
    relative to the hip.  Returns ``(q1, q2, clamped)``."""
    r = np.hypot(x, z)
    r_max = (l1 + l2) * 0.98
    r_min = abs(l1 - l2) + 0.05
    clamped = bool(r > r_max or r < r_min)
    rc = min(max(r, r_min), r_max)
    c2 = (rc * rc - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    q2 = -np.arccos(np.clip(c2, -1.0, 1.0))
    gamma = np.arctan2(-x, -z)
    q1 = gamma - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
    return float(q1), float(q2), clamped


def leg_jacobian(q1, q2, l1, l2):
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    return np.array([[-l1 * c1 - l2 * c12, -l2 * c12], [l1 * s1 + l2 * s12, l2 * s12]])


class GaitController:
    """Deterministic phase-oscillator controller for the planar quadruped."""

    def __init__(self, model: ModelDescriptor, cfg: GaitControllerConfig | None = None):
        if model.kind != KIND_PLANAR_QUADRUPED:
            raise ConfigurationError("GaitController drives the planar quadruped only")
        self.model = model
        self.cfg = cfg or GaitControllerConfig()
        g = model.geometry
        self._l1 = g["thigh_length"]
        self._l2 = g["calf_length"]
        self._hip_x = np.asarray(g["hip_x"], dtype=float)
        self._lo = np.asarray(model.joint_lower, dtype=float)
        self._hi = np.asarray(model.joint_upper, dtype=float)
        self._kp = np.asarray(model.gains()[0])
        self.saturation_count = 0

    def targets(self, x: np.ndarray, t: float, c: CommandVector) -> np.ndarray:
        cfg = self.cfg
        duty = cfg.duty if cfg.duty is not None else c.b4
        duty = min(max(duty, 0.05), 0.95)
        phase = (c.f * t) % 1.0
        beta = 2.0 * np.arctan2(x[5], x[3])
        vx, vz, wy = x[7], x[9], x[11]
        z = x[2]
        cb, sb = np.cos(beta), np.sin(beta)
        # with each pair anti-phase (trot, pace) one foot of every pair is
        # down at all times: the lumped legs alternate and lift half as high
        anti = abs(c.b1 - 0.5) < 0.25
        offset = 0.5 if anti else c.b2
        lift_scale = 0.5 if anti else 1.0
        v_ref = c.vx + cfg.velocity_gain * (c.vx - vx)
        stride = np.clip(cfg.stride_gain * v_ref * duty / c.f, -cfg.max_stride, cfg.max_stride)
        raibert = cfg.raibert_gain * (vx - c.vx)

        beta_hip = beta + cfg.leg_pitch_gain * (c.pitch - beta)
        q_ik = np.empty(4)
        stance = np.zeros(2, dtype=bool)
        foot_w = np.zeros((2, 2))
        for leg in range(2):
            psi = (phase + (offset if leg == 1 else 0.0)) % 1.0
            stance[leg] = psi < duty
            if stance[leg]:
                dx = 0.5 * stride - stride * psi / duty
                lift = 0.0
            else:
                s = (psi - duty) / (1.0 - duty)
                dx = -0.5 * stride + stride * (s - np.sin(2.0 * np.pi * s) / (2.0 * np.pi)) + raibert
                lift = float(_swing_lift(psi, duty))
            hx = self._hip_x[leg]
            # foot target relative to the hip in the world frame; the hip
            # heights lean towards the commanded pitch, so the legs resist tilt
            fx = dx + cfg.nominal_foot_x
            fz = -c.h + hx * np.sin(beta_hip) + lift_scale * c.hf * lift
            foot_w[leg] = cb * hx + fx, fz
            bx = cb * fx - sb * fz
            bz = sb * fx + cb * fz
            q1, q2, clamped = leg_ik(bx, bz, self._l1, self._l2)
            self.saturation_count += int(clamped)
            q_ik[2 * leg:2 * leg + 2] = q1, q2

        forces = self._stance_forces(stance, foot_w, z, vx, vz, beta, wy, duty, offset, c)
        out = q_ik.copy()
        for leg in range(2):
            if not stance[leg]:
                continue
            fx_w, fz_w = forces[leg]
            j0 = 2 * leg
            J = leg_jacobian(q_ik[j0], q_ik[j0 + 1], self._l1, self._l2)
            f_body = np.array([cb * fx_w - sb * fz_w, sb * fx_w + cb * fz_w])
            tau_ff = -J.T @ f_body
            out[j0:j0 + 2] += tau_ff / self._kp[j0:j0 + 2]
        before = out.copy()
        out = np.clip(out, self._lo, self._hi)
        self.saturation_count += int(np.any(out != before))
        return out

    def _stance_forces(self, stance, foot_w, z, vx, vz, beta, wy, duty, offset, c):
        """Ground forces (world x, z) requested from each stance foot: weight
        support scaled by the airborne fraction, height feedback and a pitch
        moment shared over the support polygon."""
        cfg = self.cfg
        out = np.zeros((2, 2))
        n = int(stance.sum())
        if n == 0:
            return out
        # fraction of the cycle with at least one foot down
        lag = min(offset, 1.0 - offset)
        support = min(1.0, duty + lag) if duty < 1.0 else 1.0
        fz_tot = cfg.feedforward_mass * (self.model.gravity / support
                                         + cfg.height_gain * (c.h - z) - cfg.height_damping * vz)
        fz_tot = max(fz_tot, 0.0)
        # pitch moment; positive beta is nose down
        moment = cfg.pitch_gain * (c.pitch - beta) - cfg.pitch_damping * wy
        fx_tot = cfg.feedforward_mass * cfg.speed_force_gain * (c.vx - vx)
        fx_tot = float(np.clip(fx_tot, -0.5 * fz_tot, 0.5 * fz_tot))
        out[stance, 0] = fx_tot / n
        if n == 1:
            out[int(np.argmax(stance)), 1] = fz_tot
            return out
        # vertical forces with sum fz_tot and moment -(x_f fz_f + x_r fz_r) = moment
        xf, xr = foot_w[0, 0], foot_w[1, 0]
        span = xf - xr
        if abs(span) < 1e-3:
            out[:, 1] = 0.5 * fz_tot
            return out
        ff = (-moment - xr * fz_tot) / span
        ff = min(max(ff, 0.0), fz_tot)
        out[0, 1] = ff
        out[1, 1] = fz_tot - ff
        return out

    def control(self, state: SimState, c: CommandVector) -> ControlInput:
        return ControlInput(self.targets(state.to_vector(), state.t, c))


class DirectCommandController:
    """Passes the ``vx`` channel straight through as the input of the scalar
    debug system."""

    def __init__(self, model: ModelDescriptor, cfg=None):
        if model.kind != KIND_LINEAR_1D:
            raise ConfigurationError("DirectCommandController drives the linear debug model only")
        self.model = model
        self.cfg = cfg
        self.saturation_count = 0

    def targets(self, x, t, c: CommandVector) -> np.ndarray:
        return np.array([c.vx])

    def control(self, state: SimState, c: CommandVector) -> ControlInput:
        return ControlInput(self.targets(state.to_vector(), state.t, c))


def make_controller(model: ModelDescriptor, cfg=None):
    if model.kind == KIND_PLANAR_QUADRUPED:
        return GaitController(model, cfg)
    if model.kind == KIND_LINEAR_1D:
        return DirectCommandController(model, cfg)
    raise ConfigurationError(f"no command-conditioned controller for model {model.name!r}")


def control(state: SimState, c: CommandVector, cfg: GaitControllerConfig, model: ModelDescriptor) -> ControlInput:
    return make_controller(model, cfg).control(state, c)
