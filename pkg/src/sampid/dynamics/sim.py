"""Forward simulation entry points: single steps, rollouts and batches."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DivergenceError, InvalidArgumentError
from . import kernels as K
from .models import ModelDescriptor
from .params import ParamVector
from .state import ControlInput, SimState, field_of_index


@dataclass(frozen=True)
class StepResult:
    state: SimState
    tau: np.ndarray  # mean applied joint torque over the control period
    contact_fz: np.ndarray  # mean vertical contact force per foot


def _as_target(u, n):
    qt = np.asarray(u.q_target if isinstance(u, ControlInput) else u, dtype=float).reshape(-1)
    if qt.size != n:
        raise InvalidArgumentError(f"control input has {qt.size} entries, model has {n} joints")
    return qt


def _check(x, n, t, step_index=None):
    bad = np.flatnonzero(~np.isfinite(x) | (np.abs(x) > K.DIVERGENCE_BOUND))
    if bad.size:
        fld = field_of_index(int(bad[0]), n)
        raise DivergenceError(
            f"non-finite {fld} at t={t:.4f}s" + ("" if step_index is None else f" (step {step_index})"),
            field=fld, time=t, step_index=step_index,
        )


def step_detailed(state: SimState, u, theta: ParamVector, model: ModelDescriptor) -> StepResult:
    n = model.n_joints
    x = state.to_vector()
    _check(x, n, state.t)
    phys, kap = model.pack(theta)
    kp, kd = model.gains()
    xo = np.empty((1, x.size))
    tau = np.empty((1, max(n, 1)))
    fz = np.zeros((1, 2))
    K.step_batch(model.kind, x[None], _as_target(u, n)[None], phys[None], kap[None], kp, kd,
                 model.consts(), xo, tau, fz)
    t = state.t + model.dt_control
    _check(xo[0], n, t)
    return StepResult(SimState.from_vector(xo[0], t), tau[0, :n], fz[0].copy())


def step(state: SimState, u, theta: ParamVector, model: ModelDescriptor) -> SimState:
    """Advance one control period."""
    return step_detailed(state, u, theta, model).state


@dataclass(frozen=True)
class Rollout:
    states: np.ndarray  # (H+1, S)
    taus: np.ndarray  # (H, n)
    contact_fz: np.ndarray  # (H, 2)
    t0: float
    dt: float

    def state(self, i: int) -> SimState:
        return SimState.from_vector(self.states[i], self.t0 + i * self.dt)

    def sim_states(self) -> list:
        return [self.state(i) for i in range(self.states.shape[0])]


def rollout_arrays(x0: np.ndarray, U: np.ndarray, theta: ParamVector, model: ModelDescriptor,
                   t0: float = 0.0) -> Rollout:
    U = np.ascontiguousarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] == 0:
        raise InvalidArgumentError("input sequence must be non-empty")
    n = model.n_joints
    H = U.shape[0]
    phys, kap = model.pack(theta)
    kp, kd = model.gains()
    XS = np.empty((1, H + 1, x0.size))
    TAUS = np.zeros((1, H, max(n, 1)))
    FZS = np.zeros((1, H, 2))
    fail = np.empty(1, dtype=np.int64)
    K.rollout_batch(model.kind, np.asarray(x0, dtype=float)[None], U[None], np.array([H]),
                    np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64), phys[None], kap[None],
                    kp, kd, model.consts(), XS, TAUS, FZS, fail)
    if fail[0] >= 0:
        k = int(fail[0])
        _check(XS[0, k + 1], n, t0 + (k + 1) * model.dt_control, step_index=k)
    return Rollout(XS[0], TAUS[0, :, :n], FZS[0], t0, model.dt_control)


def rollout(x0: SimState, u_seq: Sequence, theta: ParamVector, model: ModelDescriptor) -> list:
    """Open-loop replay of ``u_seq``; returns ``len(u_seq) + 1`` states."""
    if len(u_seq) == 0:
        raise InvalidArgumentError("input sequence must be non-empty")
    U = np.stack([_as_target(u, model.n_joints) for u in u_seq])
    return rollout_arrays(x0.to_vector(), U, theta, model, x0.t).sim_states()


def _chunks(n, workers):
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def clip_cost_terms(model: ModelDescriptor, X0, USEQ, REF, TREF, lengths, src, par, PH, KAP,
                    workers: int = 1):
    """Raw per-entry cost sums for open-loop clip replays (see kernels)."""
    B = src.shape[0]
    terms = np.empty((B, K.N_COST_TERMS))
    metrics = np.empty((B, 3))
    fail = np.empty(B, dtype=np.int64)
    kp, kd = model.gains()
    consts = model.consts()
    args = (model.kind, X0, USEQ, REF, TREF, lengths)

    def run(a, b):
        K.clip_cost_batch(*args, src[a:b], par[a:b], PH, KAP, kp, kd, consts, model.n_joints,
                          terms[a:b], metrics[a:b], fail[a:b])

    if workers <= 1 or B < 2:
        run(0, B)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda ab: run(*ab), _chunks(B, workers)))
    return terms, metrics, fail


def step_many(model: ModelDescriptor, X, U, PH, KAP):
    """Independent single steps; row ``b`` uses ``PH[b]``/``KAP[b]``."""
    X = np.ascontiguousarray(X, dtype=float)
    XO = np.empty_like(X)
    TAU = np.zeros((X.shape[0], max(model.n_joints, 1)))
    FZ = np.zeros((X.shape[0], 2))
    kp, kd = model.gains()
    K.step_batch(model.kind, X, np.ascontiguousarray(U, dtype=float), PH, KAP, kp, kd,
                 model.consts(), XO, TAU, FZ)
    return XO, TAU
