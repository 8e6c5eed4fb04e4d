"""H-step sequential prediction cost with parameter regularisation."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .actuator import MotorModelKind
from .dataset import Clip, ClipSet
from .dynamics.models import ModelDescriptor
from .dynamics.params import ParamVector
from .dynamics.sim import clip_cost_terms
from .errors import EvaluationFailedError, InvalidArgumentError

STATE_TERMS = ("base_pos", "base_vel", "base_quat", "base_angvel", "joint_pos", "joint_vel", "joint_torque")
REG_TERMS = ("reg_mass", "reg_com", "reg_inertia", "reg_tanh_gain", "reg_linear_gain")
TERM_NAMES = STATE_TERMS + REG_TERMS

_VELOCITY_TERMS = {"base_vel", "base_angvel", "joint_vel"}
_TORQUE_TERMS = {"joint_torque"}


@dataclass(frozen=True)
class CostWeights:
    """Term coefficients, per-term normalisers and global scales.

    The effective weight of a term is ``coefficient * normaliser * scale``,
    where ``scale`` is the velocity, torque or regularisation factor for the
    terms of those families and 1 otherwise.  Normalisers start at 1 and are
    set by :func:`normalize_weights`.
    """

    base_pos: float = 4.0
    base_vel: float = 2.0
    base_quat: float = 2.0
    base_angvel: float = 0.5
    joint_pos: float = 3.0
    joint_vel: float = 0.1
    joint_torque: float = 0.01
    reg_mass: float = 0.01
    reg_com: float = 10.0
    reg_inertia: float = 1.0
    reg_tanh_gain: float = 0.01
    reg_linear_gain: float = 0.1
    scale_velocity: float = 0.5
    scale_torque: float = 0.2
    scale_regularization: float = 0.1
    normalizers: tuple = field(default=(1.0,) * len(TERM_NAMES))
    length_normalize: bool = False
    divergence_penalty: float = 1e6

    def __post_init__(self):
        norm = tuple(float(v) for v in self.normalizers)
        if len(norm) != len(TERM_NAMES):
            raise InvalidArgumentError(f"need {len(TERM_NAMES)} normalisers")
        object.__setattr__(self, "normalizers", norm)
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not v >= 0:
                raise InvalidArgumentError(f"weight {f.name} must be >= 0")
        if any(not v >= 0 for v in norm):
            raise InvalidArgumentError("normalisers must be >= 0")

    def scale_of(self, name: str) -> float:
        if name in _VELOCITY_TERMS:
            return self.scale_velocity
        if name in _TORQUE_TERMS:
            return self.scale_torque
        if name.startswith("reg_"):
            return self.scale_regularization
        return 1.0

    def effective(self) -> np.ndarray:
        """Effective weights in :data:`TERM_NAMES` order."""
        return np.array([getattr(self, n) * self.normalizers[i] * self.scale_of(n)
                         for i, n in enumerate(TERM_NAMES)])

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["normalizers"] = dict(zip(TERM_NAMES, self.normalizers))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CostWeights":
        d = dict(d)
        norm = d.pop("normalizers", None)
        if isinstance(norm, dict):
            norm = tuple(float(norm.get(n, 1.0)) for n in TERM_NAMES)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown cost weight keys {sorted(unknown)}")
        if norm is not None:
            d["normalizers"] = norm
        return cls(**d)


@dataclass(frozen=True)
class CostReport:
    total: float
    terms: dict
    per_clip: np.ndarray
    diverged: tuple = ()
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "terms": dict(self.terms),
            "per_clip": self.per_clip.tolist(),
            "diverged": list(self.diverged),
            "metrics": dict(self.metrics),
        }


def regularization_terms(theta: ParamVector, theta0: ParamVector) -> np.ndarray:
    """Unweighted squared deviations (mass, com, inertia, tanh gain, linear gain)."""
    out = np.zeros(len(REG_TERMS))
    if "phi" in theta.layout and "phi" in theta0.layout:
        a, b = theta.inertial(), theta0.inertial()
        out[0] = (a.mass - b.mass) ** 2
        out[1] = float(np.sum((a.com - b.com) ** 2))
        out[2] = float(np.sum((a.inertia_about_com() - b.inertia_about_com()) ** 2))
    dk = float(np.sum((theta.kappa - theta0.kappa) ** 2)) if theta.kappa.size == theta0.kappa.size else 0.0
    if theta.motor_model is MotorModelKind.LINEAR_GAIN:
        out[4] = dk
    elif theta.motor_model in (MotorModelKind.UNIFIED_TANH, MotorModelKind.GROUPED_TANH):
        out[3] = dk
    return out


class CostEvaluator:
    """Evaluates the total cost of many parameter vectors on one clip set.

    Clip arrays are packed once; each call replays every clip under every
    candidate in a single batched kernel launch.
    """

    def __init__(self, clips: ClipSet, weights: CostWeights, theta0: ParamVector, model: ModelDescriptor,
                 workers: int = 1):
        if len(clips) == 0:
            raise InvalidArgumentError("clip set is empty")
        self.clips = clips
        self.weights = weights
        self.theta0 = theta0
        self.model = model
        self.workers = max(1, int(workers))
        self._packed = clips.packed()
        self.n_evaluations = 0

    def raw(self, thetas: Sequence[ParamVector]):
        """Unweighted per-clip state terms ``(P, C, 7)``, metrics ``(P, C, 3)``
        and failure indices ``(P, C)``."""
        X0, USEQ, REF, TREF, lengths = self._packed
        P, C = len(thetas), len(self.clips)
        PH, KAP = self.model.pack_many(thetas)
        src = np.tile(np.arange(C, dtype=np.int64), P)
        par = np.repeat(np.arange(P, dtype=np.int64), C)
        terms, metrics, fail = clip_cost_terms(self.model, X0, USEQ, REF, TREF, lengths, src, par, PH, KAP,
                                               self.workers)
        self.n_evaluations += P
        return terms.reshape(P, C, -1), metrics.reshape(P, C, -1), fail.reshape(P, C)

    def _weighted_clips(self, terms, fail):
        w = self.weights.effective()[: len(STATE_TERMS)]
        per = terms * w
        if self.weights.length_normalize:
            per = per / self.clips.horizons[None, :, None]
        per_clip = per.sum(axis=-1)
        per_clip = np.where(fail >= 0, self.weights.divergence_penalty, per_clip)
        return per, per_clip

    def totals(self, thetas: Sequence[ParamVector]) -> np.ndarray:
        terms, _, fail = self.raw(thetas)
        _, per_clip = self._weighted_clips(terms, fail)
        w_reg = self.weights.effective()[len(STATE_TERMS):]
        reg = np.array([regularization_terms(th, self.theta0) @ w_reg for th in thetas])
        return per_clip.sum(axis=1) + reg

    def report(self, theta: ParamVector) -> CostReport:
        terms, metrics, fail = self.raw([theta])
        per, per_clip = self._weighted_clips(terms[0:1], fail[0:1])
        ok = fail[0] < 0
        if not ok.any():
            raise EvaluationFailedError("every clip diverged under this parameter vector")
        w_reg = self.weights.effective()[len(STATE_TERMS):]
        reg = regularization_terms(theta, self.theta0) * w_reg
        term_tot = dict(zip(STATE_TERMS, per[0][ok].sum(axis=0).tolist()))
        term_tot.update(zip(REG_TERMS, reg.tolist()))
        n_pen = int((~ok).sum())
        term_tot["divergence_penalty"] = n_pen * self.weights.divergence_penalty
        total = float(per_clip[0].sum() + reg.sum())
        ticks = float(self.clips.horizons[ok].sum())
        m = metrics[0][ok].sum(axis=0)
        return CostReport(
            total=total,
            terms=term_tot,
            per_clip=per_clip[0],
            diverged=tuple(int(i) for i in np.flatnonzero(~ok)),
            metrics={"j_rpos": m[0] / ticks, "j_pja": m[1] / ticks, "j_rvel": m[2] / ticks},
        )


def clip_cost(theta: ParamVector, clip: Clip, weights: CostWeights, theta0: ParamVector, model: ModelDescriptor,
              clips: ClipSet) -> CostReport:
    """Prediction cost of one clip of ``clips`` (no regularisation)."""
    ev = CostEvaluator(ClipSet(clips.trajectories, [clip]), weights, theta0, model)
    terms, metrics, fail = ev.raw([theta])
    per, per_clip = ev._weighted_clips(terms, fail)
    return CostReport(
        total=float(per_clip[0, 0]),
        terms=dict(zip(STATE_TERMS, per[0, 0].tolist())),
        per_clip=per_clip[0],
        diverged=(0,) if fail[0, 0] >= 0 else (),
    )


def total_cost(theta: ParamVector, clips: ClipSet, weights: CostWeights, theta0: ParamVector,
               model: ModelDescriptor, workers: int = 1) -> CostReport:
    """Sum of clip costs plus one regularisation term."""
    return CostEvaluator(clips, weights, theta0, model, workers).report(theta)


def normalize_weights(raw: CostWeights, reference: ClipSet, theta0: ParamVector, model: ModelDescriptor,
                      guard: float = 1e-12) -> CostWeights:
    """Set each state term's normaliser to one over its unweighted value on
    ``reference`` at ``theta0``.

    Terms whose reference value is below ``guard`` keep normaliser 1, which
    includes every regularisation term (they vanish at ``theta0``).
    Normalisers are replaced rather than compounded, so re-normalising is
    idempotent.
    """
    if len(reference) == 0:
        raise InvalidArgumentError("reference clip set is empty")
    ev = CostEvaluator(reference, replace(raw, normalizers=(1.0,) * len(TERM_NAMES)), theta0, model)
    terms, _, fail = ev.raw([theta0])
    ok = fail[0] < 0
    tot = terms[0][ok].sum(axis=0)
    if raw.length_normalize:
        tot = (terms[0][ok] / reference.horizons[ok, None]).sum(axis=0)
    norm = list(raw.normalizers)
    for i in range(len(STATE_TERMS)):
        norm[i] = 1.0 / tot[i] if tot[i] >= guard else 1.0
    for i in range(len(STATE_TERMS), len(TERM_NAMES)):
        norm[i] = 1.0
    return replace(raw, normalizers=tuple(norm))
