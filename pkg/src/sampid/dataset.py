"""Trajectory recording, synthetic data with measurement noise, and clip
segmentation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .controller import CommandVector
from .dynamics import kernels as K
from .dynamics.models import ModelDescriptor
from .dynamics.params import ParamVector
from .dynamics.sim import _check
from .dynamics.state import BASE_DIM, ControlInput, SimState, quat_exp, quat_mul
from .errors import ConfigurationError, InvalidArgumentError


@dataclass(frozen=True)
class Trajectory:
    """Logged states ``(N+1, S)``, inputs ``(N, n)`` and applied torques
    ``(N, n)`` at a fixed control period."""

    states: np.ndarray
    inputs: np.ndarray
    tau_meas: np.ndarray
    dt: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.states, dtype=float)
        u = np.array(self.inputs, dtype=float)
        tau = np.array(self.tau_meas, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if tau.ndim == 1:
            tau = tau[:, None]
        if x.ndim != 2 or x.shape[0] != u.shape[0] + 1 or tau.shape[0] != u.shape[0]:
            raise InvalidArgumentError("need |states| = |inputs| + 1 = |tau_meas| + 1")
        if not self.dt > 0:
            raise InvalidArgumentError("dt_control must be positive")
        for name, a in (("states", x), ("inputs", u), ("tau_meas", tau)):
            if not np.all(np.isfinite(a)):
                raise InvalidArgumentError(f"non-finite values in {name}")
            a.flags.writeable = False
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "tau_meas", tau)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_joints(self) -> int:
        return (self.states.shape[1] - BASE_DIM) // 2

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def state(self, i: int) -> SimState:
        return SimState.from_vector(self.states[i], self.t0 + i * self.dt)

    def sim_states(self) -> list:
        return [self.state(i) for i in range(self.states.shape[0])]

    def control_inputs(self) -> list:
        return [ControlInput(u) for u in self.inputs]

    def with_states(self, states) -> "Trajectory":
        return Trajectory(states, self.inputs, self.tau_meas, self.dt, self.t0, self.meta)

    def truncated(self, n_steps: int) -> "Trajectory":
        n_steps = int(n_steps)
        return Trajectory(self.states[: n_steps + 1], self.inputs[:n_steps], self.tau_meas[:n_steps],
                          self.dt, self.t0, self.meta)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian measurement noise per observation channel.

    Units: m, rad (orientation as a rotation-vector perturbation), m/s,
    rad/s, rad, rad/s.
    """

    position: float = 0.0
    orientation: float = 0.0
    velocity: float = 0.0
    angular_velocity: float = 0.0
    joint_position: float = 0.0
    joint_velocity: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name != "seed" and not getattr(self, f.name) >= 0:
                raise InvalidArgumentError(f"noise sigma {f.name} must be >= 0")

    @classmethod
    def encoder_level(cls, seed: int = 0) -> "NoiseSpec":
        """1 mm / 0.01 rad base pose with encoder-grade joint noise."""
        return cls(1e-3, 0.01, 0.02, 0.02, 1e-3, 0.02, seed)

    def is_zero(self) -> bool:
        return all(getattr(self, f.name) == 0 for f in fields(self) if f.name != "seed")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def apply(self, states: np.ndarray, model: ModelDescriptor, rng=None) -> np.ndarray:
        """Noisy copy of ``states``; DoFs the model never moves stay exact."""
        rng = np.random.default_rng(self.seed) if rng is None else rng
        x = np.array(states, dtype=float)
        N, S = x.shape
        n = (S - BASE_DIM) // 2
        frozen = model.frozen_mask()
        sig = np.zeros(S)
        sig[0:3] = self.position
        sig[7:10] = self.velocity
        sig[10:13] = self.angular_velocity
        sig[BASE_DIM:BASE_DIM + n] = self.joint_position
        sig[BASE_DIM + n:] = self.joint_velocity
        sig[3:7] = 0.0
        sig[frozen] = 0.0
        x += rng.standard_normal((N, S)) * sig
        if self.orientation > 0 and not np.all(frozen[3:7]):
            # rotation-vector noise about the axes the base can turn around
            axes = ~frozen[4:7]
            rv = rng.standard_normal((N, 3)) * self.orientation * axes
            x[:, 3:7] = quat_mul(x[:, 3:7], quat_exp(rv))
            x[:, 3:7] /= np.linalg.norm(x[:, 3:7], axis=1, keepdims=True)
        return x


CommandSchedule = Callable[[float], CommandVector]


def _command_at(schedule, i: int, t: float) -> CommandVector:
    if callable(schedule):
        return schedule(t)
    if isinstance(schedule, CommandVector):
        return schedule
    return schedule[min(i, len(schedule) - 1)]


def is_fallen(x: np.ndarray, model: ModelDescriptor) -> bool:
    if model.kind != K.KIND_PLANAR_QUADRUPED:
        return False
    pitch = 2.0 * math.atan2(x[5], x[3])
    return bool(x[2] < model.fall_height or abs(pitch) > model.fall_pitch)


def simulate_closed_loop(theta: ParamVector, controller, command_schedule, duration: float,
                         model: ModelDescriptor, x0: SimState | None = None,
                         stop_on_fall: bool = False):
    """Closed-loop rollout.  Returns ``(states, inputs, taus, fell_at)`` where
    ``fell_at`` is the tick of the first fall or None."""
    from .dynamics.models import standing_state

    if not duration > 0:
        raise InvalidArgumentError("duration must be positive")
    n_steps = int(round(duration / model.dt_control))
    x = (x0 or standing_state(model)).to_vector()
    t0 = 0.0 if x0 is None else x0.t
    n = model.n_joints
    phys, kap = model.pack(theta)
    kp, kd = model.gains()
    consts = model.consts()
    X = np.empty((n_steps + 1, x.size))
    U = np.empty((n_steps, n))
    T = np.empty((n_steps, n))
    X[0] = x
    xo = np.empty((1, x.size))
    tau = np.empty((1, max(n, 1)))
    fz = np.empty((1, 2))
    fell_at = None
    for i in range(n_steps):
        t = t0 + i * model.dt_control
        c = _command_at(command_schedule, i, t)
        U[i] = controller.targets(X[i], t, c)
        K.step_batch(model.kind, X[i][None], U[i][None], phys[None], kap[None], kp, kd, consts, xo, tau, fz)
        _check(xo[0], n, t + model.dt_control, step_index=i)
        X[i + 1] = xo[0]
        T[i] = tau[0, :n]
        if fell_at is None and is_fallen(X[i + 1], model):
            fell_at = i + 1
            if stop_on_fall:
                return X[: i + 2], U[: i + 1], T[: i + 1], fell_at
    return X, U, T, fell_at


def generate_synthetic(theta_true: ParamVector, controller, command_schedule, duration: float,
                       noise: NoiseSpec, model: ModelDescriptor, x0: SimState | None = None,
                       source_id: str = "synthetic", stop_on_fall: bool = False,
                       return_truth: bool = False):
    """Closed-loop data collection under ``theta_true``.

    Measurement noise corrupts the logged states only; inputs and applied
    torques are logged exactly.  The controller acts on the true state.
    With ``stop_on_fall`` the recording ends at the first fall, as an
    operator would stop a run.
    """
    X, U, T, fell_at = simulate_closed_loop(theta_true, controller, command_schedule, duration, model,
                                            x0, stop_on_fall)
    meta = {
        "source_id": source_id,
        "dt_control": model.dt_control,
        "model": model.name,
        "seed": noise.seed,
        "noise": noise.to_dict(),
        "fell_at": fell_at,
    }
    t0 = 0.0 if x0 is None else x0.t
    truth = Trajectory(X, U, T, model.dt_control, t0, meta)
    logged = truth if noise.is_zero() else truth.with_states(noise.apply(X, model))
    return (logged, truth) if return_truth else logged


# ------------------------------------------------------------------ clips


@dataclass(frozen=True)
class Clip:
    traj_id: int
    start: int
    horizon: int

    def __post_init__(self):
        if self.horizon < 1 or self.start < 0:
            raise InvalidArgumentError("clip needs start >= 0 and horizon >= 1")

    @property
    def stop(self) -> int:
        return self.start + self.horizon


@dataclass(frozen=True)
class ClipSet:
    trajectories: tuple
    clips: tuple

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "clips", tuple(self.clips))
        for c in self.clips:
            if c.traj_id >= len(self.trajectories):
                raise InvalidArgumentError(f"clip refers to missing trajectory {c.traj_id}")
            if c.stop > self.trajectories[c.traj_id].n_steps:
                raise InvalidArgumentError("clip runs past the end of its trajectory")

    def __len__(self):
        return len(self.clips)

    def subset(self, indices) -> "ClipSet":
        return ClipSet(self.trajectories, [self.clips[i] for i in indices])

    def split(self, fraction: float):
        """First ``fraction`` of clips (at least one) and the rest."""
        k = max(1, int(round(fraction * len(self.clips))))
        k = min(k, len(self.clips) - 1) if len(self.clips) > 1 else k
        return self.subset(range(k)), self.subset(range(k, len(self.clips)))

    def __add__(self, other: "ClipSet") -> "ClipSet":
        off = len(self.trajectories)
        moved = [Clip(c.traj_id + off, c.start, c.horizon) for c in other.clips]
        return ClipSet(self.trajectories + other.trajectories, self.clips + tuple(moved))

    @property
    def horizons(self) -> np.ndarray:
        return np.array([c.horizon for c in self.clips], dtype=np.int64)

    def packed(self):
        """Padded kernel arrays ``(X0, USEQ, REF, TREF, lengths)``."""
        if not self.clips:
            raise InvalidArgumentError("clip set is empty")
        C = len(self.clips)
        H = int(self.horizons.max())
        S = self.trajectories[0].states.shape[1]
        n = self.trajectories[0].inputs.shape[1]
        X0 = np.empty((C, S))
        USEQ = np.zeros((C, H, n))
        REF = np.zeros((C, H + 1, S))
        TREF = np.zeros((C, H, n))
        for k, c in enumerate(self.clips):
            tr = self.trajectories[c.traj_id]
            X0[k] = tr.states[c.start]
            USEQ[k, : c.horizon] = tr.inputs[c.start:c.stop]
            REF[k, : c.horizon + 1] = tr.states[c.start:c.stop + 1]
            TREF[k, : c.horizon] = tr.tau_meas[c.start:c.stop]
        return X0, USEQ, REF, TREF, self.horizons


def segment(traj: Trajectory, h_min: int, h_max: int, seed: int = 0) -> ClipSet:
    """Partition ``traj`` into consecutive clips with horizons drawn from the
    integer uniform distribution on ``[h_min, h_max]``.

    A remainder shorter than ``h_min`` is merged into the previous clip.
    """
    return segment_many([traj], h_min, h_max, seed)


def _tile(N: int, h_min: int, h_max: int, rng, traj_id: int) -> list:
    if N < h_min:
        raise InvalidArgumentError(f"trajectory of {N} steps is shorter than h_min={h_min}: no clips")
    clips = []
    start = 0
    while start < N:
        H = int(rng.integers(h_min, h_max + 1))
        H = min(H, N - start)
        if H < h_min:
            last = clips.pop()
            clips.append(Clip(traj_id, last.start, last.horizon + H))
            break
        clips.append(Clip(traj_id, start, H))
        start += H
    return clips


def segment_many(trajs: Sequence[Trajectory], h_min: int, h_max: int, seed: int = 0) -> ClipSet:
    h_min, h_max = int(h_min), int(h_max)
    if h_min < 1 or h_max < h_min:
        raise InvalidArgumentError("need 1 <= h_min <= h_max")
    rng = np.random.default_rng(seed)
    clips = []
    for i, tr in enumerate(trajs):
        clips.extend(_tile(tr.n_steps, h_min, min(h_max, tr.n_steps), rng, i))
    return ClipSet(list(trajs), clips)


def seconds_to_steps(seconds: float, dt: float) -> int:
    return max(1, int(round(seconds / dt)))


# -------------------------------------------------------------- file I/O


def _finite_list(rec, key, size=None):
    v = rec.get(key)
    if v is None:
        raise ConfigurationError(f"record is missing {key!r}")
    a = np.asarray(v, dtype=float).reshape(-1)
    if size is not None and a.size != size:
        raise ConfigurationError(f"{key!r} has {a.size} entries, expected {size}")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"non-finite value in {key!r}")
    return a


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_trajectory(path, traj: Trajectory) -> Path:
    """JSON Lines, one record per control tick.  The final record carries the
    last state with ``u`` and ``tau`` set to null."""
    path = Path(path)
    n = traj.n_joints
    with path.open("w") as fh:
        for i in range(traj.states.shape[0]):
            x = traj.states[i]
            rec = {
                "t": float(traj.t0 + i * traj.dt),
                "p": x[0:3].tolist(),
                "quat": x[3:7].tolist(),
                "v": x[7:10].tolist(),
                "omega": x[10:13].tolist(),
                "q": x[13:13 + n].tolist(),
                "dq": x[13 + n:].tolist(),
                "u": traj.inputs[i].tolist() if i < traj.n_steps else None,
                "tau": traj.tau_meas[i].tolist() if i < traj.n_steps else None,
            }
            fh.write(json.dumps(rec) + "\n")
    meta = dict(traj.meta)
    meta.setdefault("dt_control", traj.dt)
    meta["dt"] = traj.dt
    meta["n_joints"] = n
    meta_path(path).write_text(json.dumps(meta, indent=2))
    return path


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    mp = meta_path(path)
    meta = json.loads(mp.read_text()) if mp.exists() else {}
    states, inputs, taus, times = [], [], [], []
    with path.open() as fh:
        lines = [ln for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise ConfigurationError(f"{path}: need at least two records")
    n = None
    for k, ln in enumerate(lines):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}:{k + 1}: {exc}") from exc
        q = _finite_list(rec, "q")
        n = q.size if n is None else n
        x = np.concatenate([
            _finite_list(rec, "p", 3), _finite_list(rec, "quat", 4), _finite_list(rec, "v", 3),
            _finite_list(rec, "omega", 3), _finite_list(rec, "q", n), _finite_list(rec, "dq", n),
        ])
        times.append(float(_finite_list(rec, "t", 1)[0]))
        states.append(x)
        if k < len(lines) - 1:
            inputs.append(_finite_list(rec, "u", n))
            taus.append(_finite_list(rec, "tau", n))
    times = np.asarray(times)
    dt = float(meta.get("dt", times[1] - times[0]))
    if np.any(np.diff(times) <= 0):
        raise ConfigurationError(f"{path}: timestamps must increase strictly")
    return Trajectory(np.array(states), np.array(inputs), np.array(taus), dt, times[0], meta)
