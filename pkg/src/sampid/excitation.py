"""Active exploration: parameter sensitivities, Fisher information and
Bezier command-plan optimisation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .cmaes import CmaesConfig, minimize
from .controller import COMMAND_CHANNELS, GAITS, CommandVector
from .dataset import NoiseSpec, is_fallen
from .dynamics import kernels as K
from .dynamics.models import ModelDescriptor, standing_state
from .dynamics.params import ParamSpace, ParamVector
from .dynamics.state import SimState, tangent_difference
from .errors import (ConfigurationError, ExcitationFailedError, InvalidArgumentError,
                     SensitivityFailedError)

PLAN_CHANNELS = ("vx", "vy", "wz", "roll", "pitch")
SEGMENT_SECONDS = 4.0
N_POINTS = 11
# relative disagreement of one-sided slopes that marks a non-smooth step
FD_AGREEMENT = 0.5


# ------------------------------------------------------------------ curves


def bezier_eval(control_points, s: float) -> float:
    """De Casteljau evaluation of a Bezier curve at ``s`` in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise InvalidArgumentError(f"curve parameter {s} outside [0, 1]")
    b = np.array(control_points, dtype=float).reshape(-1)
    if b.size == 0:
        raise InvalidArgumentError("need at least one control point")
    for r in range(1, b.size):
        b[: b.size - r] = (1.0 - s) * b[: b.size - r] + s * b[1: b.size - r + 1]
    return float(b[0])


def bezier_curve(control_points, s) -> np.ndarray:
    """Vectorised De Casteljau over many parameters; ``control_points`` may
    carry leading channel axes, ``(..., K)`` -> ``(..., len(s))``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise InvalidArgumentError("curve parameters must lie in [0, 1]")
    b = np.repeat(np.asarray(control_points, dtype=float)[..., None], s.size, axis=-1)
    k = b.shape[-2]
    for r in range(1, k):
        b[..., : k - r, :] = (1.0 - s) * b[..., : k - r, :] + s * b[..., 1: k - r + 1, :]
    return b[..., 0, :]


# ------------------------------------------------------------------ plans


@dataclass(frozen=True)
class PlanSegment:
    points: np.ndarray  # (channels, control points)
    gait: int = 1
    duration: float = SEGMENT_SECONDS

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2:
            raise InvalidArgumentError("segment control points must be (channels, points)")
        p.flags.writeable = False
        object.__setattr__(self, "points", p)
        if int(self.gait) not in range(len(GAITS)):
            raise InvalidArgumentError(f"gait index {self.gait} not in 0..{len(GAITS) - 1}")
        object.__setattr__(self, "gait", int(self.gait))
        if not self.duration > 0:
            raise InvalidArgumentError("segment duration must be positive")


@dataclass(frozen=True)
class BezierCommandPlan:
    """Piecewise Bezier command profile with one gait per segment.

    ``channels`` names the optimised command channels; all other channels
    come from a fixed command when the plan is resampled.
    """

    segments: tuple
    channels: tuple = PLAN_CHANNELS
    bounds: np.ndarray = None  # (channels, 2)

    def __post_init__(self):
        segs = tuple(self.segments)
        chans = tuple(self.channels)
        for ch in chans:
            if ch not in COMMAND_CHANNELS or ch in ("b1", "b2"):
                raise ConfigurationError(f"{ch!r} is not an optimisable command channel")
        if self.bounds is None:
            b = np.tile([-np.inf, np.inf], (len(chans), 1))
        else:
            b = np.array(self.bounds, dtype=float).reshape(len(chans), 2)
        if np.any(b[:, 0] > b[:, 1]):
            raise ConfigurationError("channel bounds need min <= max")
        b.flags.writeable = False
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "bounds", b)
        for s in segs:
            if s.points.shape[0] != len(chans):
                raise InvalidArgumentError("segment channel count differs from the plan")
            if s.points.shape[1] != segs[0].points.shape[1]:
                raise InvalidArgumentError("all segments need the same number of control points")
            if np.any(s.points < b[:, :1] - 1e-12) or np.any(s.points > b[:, 1:] + 1e-12):
                raise InvalidArgumentError("control points outside the channel bounds")

    @classmethod
    def constant(cls, n_segments: int, values: dict | None = None, channels=PLAN_CHANNELS, bounds=None,
                 gait: int = 1, n_points: int = N_POINTS, duration: float = SEGMENT_SECONDS):
        values = values or {}
        pts = np.array([[values.get(ch, 0.0)] * n_points for ch in channels], dtype=float).reshape(
            len(channels), n_points)
        seg = PlanSegment(pts, gait, duration)
        return cls(tuple(seg for _ in range(n_segments)), channels, bounds)

    @classmethod
    def random(cls, template: "BezierCommandPlan", rng: np.random.Generator,
               random_gaits: bool = True) -> "BezierCommandPlan":
        lo, hi = template.bounds[:, 0], template.bounds[:, 1]
        if not np.all(np.isfinite(template.bounds)):
            raise ConfigurationError("random plans need finite channel bounds")
        segs = []
        for s in template.segments:
            pts = lo[:, None] + rng.random(s.points.shape) * (hi - lo)[:, None]
            gait = int(rng.integers(len(GAITS))) if random_gaits else s.gait
            segs.append(PlanSegment(pts, gait, s.duration))
        return replace(template, segments=tuple(segs))

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def n_points(self) -> int:
        return self.segments[0].points.shape[1] if self.segments else 0

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def gaits(self) -> tuple:
        return tuple(s.gait for s in self.segments)

    @property
    def n_continuous(self) -> int:
        return self.n_segments * len(self.channels) * self.n_points

    def continuous(self) -> np.ndarray:
        if not self.segments:
            return np.zeros(0)
        return np.concatenate([s.points.reshape(-1) for s in self.segments])

    def continuous_bounds(self) -> np.ndarray:
        per = np.repeat(self.bounds, self.n_points, axis=0)
        return np.tile(per, (self.n_segments, 1))

    def with_continuous(self, x) -> "BezierCommandPlan":
        x = np.asarray(x, dtype=float)
        if x.size != self.n_continuous:
            raise InvalidArgumentError(f"expected {self.n_continuous} control values, got {x.size}")
        shape = (len(self.channels), self.n_points)
        step = shape[0] * shape[1]
        segs = tuple(replace(s, points=x[i * step:(i + 1) * step].reshape(shape))
                     for i, s in enumerate(self.segments))
        return replace(self, segments=segs)

    def with_gaits(self, gaits: Sequence[int]) -> "BezierCommandPlan":
        if len(gaits) != self.n_segments:
            raise InvalidArgumentError("one gait per segment")
        return replace(self, segments=tuple(replace(s, gait=int(g)) for s, g in zip(self.segments, gaits)))

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "bounds": self.bounds.tolist(),
            "segments": [{"duration": s.duration, "gait": s.gait, "points": s.points.tolist()}
                         for s in self.segments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BezierCommandPlan":
        try:
            segs = tuple(PlanSegment(s["points"], s.get("gait", 1), s.get("duration", SEGMENT_SECONDS))
                         for s in d["segments"])
            return cls(segs, tuple(d.get("channels", PLAN_CHANNELS)), d.get("bounds"))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed plan record: {exc}") from exc


def save_plan(path, plan: BezierCommandPlan) -> Path:
    path = Path(path)
    path.write_text(json.dumps(plan.to_dict(), indent=2))
    return path


def load_plan(path) -> BezierCommandPlan:
    return BezierCommandPlan.from_dict(json.loads(Path(path).read_text()))


def plan_to_commands(plan: BezierCommandPlan, dt_control: float,
                     fixed_channels: CommandVector | None = None) -> list:
    """Resample the plan at the control rate; one command per tick."""
    if plan.n_segments == 0:
        raise InvalidArgumentError("plan has no segments")
    base = fixed_channels or CommandVector()
    out = []
    for seg in plan.segments:
        n = int(round(seg.duration / dt_control))
        s = np.arange(n) * dt_control / seg.duration
        vals = bezier_curve(seg.points, np.clip(s, 0.0, 1.0))
        b1, b2 = GAITS[seg.gait]
        gaited = base.replace(b1=b1, b2=b2)
        for k in range(n):
            out.append(gaited.replace(**{ch: float(vals[i, k]) for i, ch in enumerate(plan.channels)}))
    return out


# ------------------------------------------------------------------ sensitivities


def _perturbed_packs(theta: ParamVector, eps: np.ndarray, indices: np.ndarray, model: ModelDescriptor):
    """Kernel packs for ``[theta, theta + eps_i e_i ..., theta - eps_i e_i ...]``."""
    thetas = [theta]
    for sign in (1.0, -1.0):
        for k, i in enumerate(indices):
            v = theta.values.copy()
            v[i] += sign * eps[k]
            thetas.append(theta.with_values(v))
    return model.pack_many(thetas)


def _step_rows(model, x, u, PH, KAP, kp, kd, consts):
    B = PH.shape[0]
    X = np.repeat(np.asarray(x, dtype=float)[None], B, axis=0)
    U = np.repeat(np.asarray(u, dtype=float).reshape(1, -1), B, axis=0)
    XO = np.empty_like(X)
    TAU = np.zeros((B, max(model.n_joints, 1)))
    FZ = np.zeros((B, 2))
    K.step_batch(model.kind, X, U, PH, KAP, kp, kd, consts, XO, TAU, FZ)
    return XO


def _columns(XO, eps, indices, model):
    d = indices.size
    plus, minus = XO[1:1 + d], XO[1 + d:]
    bad = ~(np.all(np.isfinite(plus), axis=1) & np.all(np.isfinite(minus), axis=1))
    if bad.any():
        k = int(np.argmax(bad))
        raise SensitivityFailedError(f"perturbed step diverged for parameter index {int(indices[k])}",
                                     param_index=int(indices[k]))
    base = np.repeat(XO[:1], d, axis=0)
    fwd = tangent_difference(plus, base, model.n_joints) / eps[:, None]
    bwd = tangent_difference(base, minus, model.n_joints) / eps[:, None]
    cen = 0.5 * (fwd + bwd)
    # a contact mode switch inside [theta - eps, theta + eps] shows up as
    # disagreeing one-sided slopes; take the smaller one (minmod) there
    agree = np.abs(fwd - bwd) <= FD_AGREEMENT * np.maximum(np.abs(fwd), np.abs(bwd)) + 1e-12
    minmod = np.where(fwd * bwd > 0.0, np.where(np.abs(fwd) < np.abs(bwd), fwd, bwd), 0.0)
    cols = np.where(agree, cen, minmod)
    cols[:, _tangent_frozen(model)] = 0.0
    return cols.T


def _tangent_frozen(model: ModelDescriptor) -> np.ndarray:
    """Frozen-DoF mask in tangent coordinates (quaternion -> rotation vector)."""
    m = model.frozen_mask()
    return np.concatenate([m[0:3], m[4:7], m[7:]])


def fd_sensitivity(x, u, theta: ParamVector, eps, model: ModelDescriptor, indices=None) -> np.ndarray:
    """Central-difference Jacobian of the one-tick map with respect to the
    parameters ``indices`` (default all); shape ``(tangent dim, d)``.

    Orientation rows hold the rotation vector of the relative quaternion.
    """
    xv = x.to_vector() if isinstance(x, SimState) else np.asarray(x, dtype=float)
    uv = np.asarray(getattr(u, "q_target", u), dtype=float).reshape(-1)
    indices = np.arange(len(theta)) if indices is None else np.asarray(indices, dtype=int)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), indices.shape).copy()
    if np.any(~(eps > 0)):
        raise InvalidArgumentError("finite-difference steps must be positive")
    PH, KAP = _perturbed_packs(theta, eps, indices, model)
    kp, kd = model.gains()
    XO = _step_rows(model, xv, uv, PH, KAP, kp, kd, model.consts())
    return _columns(XO, eps, indices, model)


# ------------------------------------------------------------------ information


@dataclass(frozen=True)
class FimEstimate:
    matrix: np.ndarray
    sigma: float = 1.0
    n_samples: int = 0
    terminated: bool = False
    survived: float = 1.0  # fraction of the planned ticks completed

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError("FIM must be square")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be positive")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "sigma": self.sigma, "n_samples": self.n_samples,
                "terminated": self.terminated, "survived": self.survived}


@dataclass(frozen=True)
class ExcitationConfig:
    """Settings of the trace-inverse objective.

    ``reg_relative`` scales the ridge by the mean diagonal of the template
    plan's information; an explicit ``reg`` overrides it.  ``penalty`` None
    derives the termination weight
    from the template (twice its trace-inverse).
    """

    sigma: float = 1.0
    n_seeds: int = 1
    eps_unit: float = 1e-4
    reg_relative: float = 1e-6
    reg: float | None = None
    penalty: float | None = None
    gait_sweep: bool = True
    # random plans screened before CMA-ES; the best one seeds the search
    init_samples: int = 8
    rounds: int = 1
    observation_noise: NoiseSpec | None = None

    def __post_init__(self):
        if not (self.sigma > 0 and self.eps_unit > 0 and self.reg_relative > 0):
            raise ConfigurationError("sigma, eps_unit and reg_relative must be positive")
        if self.reg is not None and not self.reg > 0:
            raise ConfigurationError("reg must be positive")
        if self.n_seeds < 1 or self.rounds < 1 or self.init_samples < 0:
            raise ConfigurationError("need at least one seed and one round")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("sigma", "n_seeds", "eps_unit", "reg_relative", "reg", "penalty",
                                            "gait_sweep", "init_samples", "rounds")}
        d["observation_noise"] = None if self.observation_noise is None else self.observation_noise.to_dict()
        return d


def _fd_setup(theta: ParamVector, space: ParamSpace | None, eps_unit: float):
    """Indices, parameter steps and the column scale to the reported coordinates."""
    if space is None:
        idx = np.arange(len(theta))
        eps = 1e-5 * np.maximum(1.0, np.abs(theta.values))
        return idx, eps, np.ones(idx.size)
    idx = space.free
    return idx, eps_unit * space.width, space.width


def fim_accumulate(x0: SimState | None, plan: BezierCommandPlan, theta_hat: ParamVector, controller,
                   model: ModelDescriptor, noise_seed: int = 0, space: ParamSpace | None = None,
                   config: ExcitationConfig | None = None,
                   fixed_channels: CommandVector | None = None) -> FimEstimate:
    """Fisher information of a closed-loop rollout of ``plan`` under ``theta_hat``.

    With ``space`` the matrix is over the free parameters in unit-box
    coordinates; otherwise over all parameters in their own units.  A fall
    stops accumulation and marks the estimate terminated.  Several noise
    seeds (``config.n_seeds``) average rollouts whose controller sees noisy
    observations.
    """
    cfg = config or ExcitationConfig()
    idx, eps, scale = _fd_setup(theta_hat, space, cfg.eps_unit)
    d = idx.size
    x_init = (x0 or standing_state(model))
    if plan.n_segments == 0 or plan.duration <= 0:
        return FimEstimate(np.zeros((d, d)), cfg.sigma, 0)
    cmds = plan_to_commands(plan, model.dt_control, fixed_channels)
    PH, KAP = _perturbed_packs(theta_hat, eps, idx, model)
    kp, kd = model.gains()
    consts = model.consts()
    total = np.zeros((d, d))
    samples = 0
    worst = 1.0
    terminated = False
    for k in range(cfg.n_seeds):
        obs = cfg.observation_noise
        rng = np.random.default_rng([noise_seed, k])
        x = x_init.to_vector()
        t = x_init.t
        F = np.zeros((d, d))
        n_done = 0
        for i, c in enumerate(cmds):
            seen = x if obs is None or obs.is_zero() else obs.apply(x[None], model, rng)[0]
            u = controller.targets(seen, t, c)
            XO = _step_rows(model, x, u, PH, KAP, kp, kd, consts)
            S = _columns(XO, eps, idx, model) * scale
            F += S.T @ S
            n_done += 1
            x = XO[0]
            t += model.dt_control
            if not np.all(np.isfinite(x)) or is_fallen(x, model):
                terminated = True
                break
        total += F / cfg.sigma ** 2
        samples += n_done
        worst = min(worst, n_done / len(cmds))
    return FimEstimate(total / cfg.n_seeds, cfg.sigma, samples, terminated, worst)


def trace_inverse(F, reg: float = 0.0) -> float:
    F = np.asarray(F, dtype=float)
    A = F + reg * np.eye(F.shape[0])
    try:
        return float(np.trace(np.linalg.inv(A)))
    except np.linalg.LinAlgError:
        return math.inf


def objective_value(fim: FimEstimate, reg: float, penalty: float) -> float:
    """``tr((F + reg I)^-1) + penalty (1 - survived fraction)``."""
    return trace_inverse(fim.matrix, reg) + penalty * (1.0 - fim.survived)


def excitation_objective(plan: BezierCommandPlan, theta_hat: ParamVector, controller, model: ModelDescriptor,
                         reg: float, penalty: float = 0.0, x0: SimState | None = None,
                         space: ParamSpace | None = None, config: ExcitationConfig | None = None,
                         noise_seed: int = 0, fixed_channels: CommandVector | None = None) -> float:
    """A-optimal design criterion with a termination penalty; lower is better."""
    if not reg > 0:
        raise InvalidArgumentError("reg must be positive")
    fim = fim_accumulate(x0, plan, theta_hat, controller, model, noise_seed, space, config, fixed_channels)
    return objective_value(fim, reg, penalty)


@dataclass
class PlanResult:
    plan: BezierCommandPlan
    value: float
    fim: FimEstimate
    reg: float
    penalty: float
    template_value: float
    history: list = field(default_factory=list)
    n_evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "value": self.value,
            "fim": self.fim.to_dict(),
            "reg": self.reg,
            "penalty": self.penalty,
            "template_value": self.template_value,
            "history": [list(h) for h in self.history],
            "n_evaluations": self.n_evaluations,
        }


class PlanObjective:
    """Objective over plans with the ridge and penalty fixed from a template."""

    def __init__(self, theta_hat, controller, model, template, space=None, config=None, x0=None,
                 noise_seed=0, fixed_channels=None, reg=None, penalty=None):
        self.theta_hat = theta_hat
        self.controller = controller
        self.model = model
        self.space = space
        self.config = config or ExcitationConfig()
        self.x0 = x0
        self.noise_seed = noise_seed
        self.fixed = fixed_channels
        self.n_evaluations = 0
        base = self.fim(template)
        mean_diag = float(np.mean(np.diag(base.matrix))) if base.dim else 0.0
        if reg is None:
            reg = self.config.reg
        if reg is None:
            reg = self.config.reg_relative * (mean_diag if mean_diag > 0 else 1.0)
        self.reg = reg
        if penalty is not None:
            self.penalty = penalty
        elif self.config.penalty is not None:
            self.penalty = self.config.penalty
        else:
            self.penalty = 2.0 * trace_inverse(base.matrix, self.reg)
        self.template_fim = base

    def fim(self, plan) -> FimEstimate:
        self.n_evaluations += 1
        return fim_accumulate(self.x0, plan, self.theta_hat, self.controller, self.model, self.noise_seed,
                              self.space, self.config, self.fixed)

    def value(self, plan) -> float:
        return objective_value(self.fim(plan), self.reg, self.penalty)

    def __call__(self, plan) -> float:
        return self.value(plan)


def optimize_plan(theta_hat: ParamVector, controller, model: ModelDescriptor, cmaes_config: CmaesConfig,
                  plan_template: BezierCommandPlan, space: ParamSpace | None = None,
                  config: ExcitationConfig | None = None, x0: SimState | None = None,
                  fixed_channels: CommandVector | None = None, noise_seed: int = 0) -> PlanResult:
    """CMA-ES over every control point, alternated with a per-segment sweep
    over the four gaits."""
    cfg = config or ExcitationConfig()
    if plan_template.n_segments == 0:
        raise ConfigurationError("plan template has no segments")
    obj = PlanObjective(theta_hat, controller, model, plan_template, space, cfg, x0, noise_seed, fixed_channels)
    template_value = objective_value(obj.template_fim, obj.reg, obj.penalty)
    if plan_template.n_continuous == 0 or len(plan_template.channels) == 0:
        return PlanResult(plan_template, template_value, obj.template_fim, obj.reg, obj.penalty,
                          template_value, [], obj.n_evaluations)
    if not np.all(np.isfinite(plan_template.bounds)):
        raise ConfigurationError("plan optimisation needs finite channel bounds")
    cb = plan_template.continuous_bounds()
    # a zero-width channel is pinned by widening its box imperceptibly
    pinned = cb[:, 0] >= cb[:, 1]
    cb = cb.copy()
    cb[pinned, 1] = cb[pinned, 0] + 1e-12
    immediate = [0]

    def evaluate(plan):
        fim = obj.fim(plan)
        if fim.n_samples <= 1 and fim.terminated:
            immediate[0] += 1
        return objective_value(fim, obj.reg, obj.penalty), fim

    best_plan, best_val, best_fim = plan_template, template_value, obj.template_fim
    history = []
    n_tried = 0
    rng = np.random.default_rng([cmaes_config.seed, 7])
    for _ in range(cfg.init_samples):
        cand = BezierCommandPlan.random(plan_template, rng, random_gaits=cfg.gait_sweep)
        cand = cand.with_continuous(np.where(pinned, cb[:, 0], cand.continuous()))
        val, fim = evaluate(cand)
        n_tried += 1
        if val < best_val:
            best_plan, best_val, best_fim = cand, val, fim
    for rnd in range(cfg.rounds):
        current = best_plan

        def batch(X):
            out = np.empty(X.shape[0])
            for j, xj in enumerate(X):
                xj = np.where(pinned, cb[:, 0], xj)
                out[j] = evaluate(current.with_continuous(xj))[0]
            return out

        ccfg = replace(cmaes_config, bounds=cb, seed=cmaes_config.seed + rnd)
        x_start = np.clip(current.continuous(), cb[:, 0], cb[:, 1])
        res = minimize(None, x_start, ccfg, batch_objective=batch)
        n_tried += res.n_evaluations
        history.extend((len(history), h[1], h[2]) for h in res.history)
        if res.value < best_val:
            best_plan = current.with_continuous(np.where(pinned, cb[:, 0], res.x))
            best_val, best_fim = evaluate(best_plan)
        if cfg.gait_sweep:
            for si in range(best_plan.n_segments):
                for g in range(len(GAITS)):
                    if g == best_plan.gaits[si]:
                        continue
                    gaits = list(best_plan.gaits)
                    gaits[si] = g
                    cand = best_plan.with_gaits(gaits)
                    val, fim = evaluate(cand)
                    n_tried += 1
                    if val < best_val:
                        best_plan, best_val, best_fim = cand, val, fim
    if n_tried and immediate[0] >= n_tried:
        raise ExcitationFailedError("every candidate plan fell immediately; widen the command bounds "
                                    "or soften the gait settings")
    return PlanResult(best_plan, best_val, best_fim, obj.reg, obj.penalty, template_value, history,
                      obj.n_evaluations)


def default_template(model: ModelDescriptor, n_segments: int = 10, n_points: int = N_POINTS,
                     channels=None, bounds=None) -> BezierCommandPlan:
    """Starting plan: standing trot (quadruped) or zero input (others)."""
    if model.kind == K.KIND_PLANAR_QUADRUPED:
        # the planar body only responds to forward speed and pitch
        channels = channels or ("vx", "pitch")
        default_bounds = {"vx": (-0.3, 0.6), "vy": (0.0, 0.0), "wz": (0.0, 0.0),
                          "roll": (0.0, 0.0), "pitch": (-0.15, 0.15)}
    else:
        channels = channels or ("vx",)
        default_bounds = {"vx": (-1.0, 1.0)}
    if bounds is None:
        bounds = [default_bounds.get(ch, (0.0, 0.0)) for ch in channels]
    return BezierCommandPlan.constant(n_segments, {}, channels, bounds, 1, n_points)
