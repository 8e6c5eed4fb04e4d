"""Two-stage identification: passive data, then actively excited data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .actuator import MotorModelKind
from .cmaes import OptResult, minimize
from .config import PipelineConfig
from .controller import CommandVector, make_controller
from .cost import CostEvaluator, CostWeights, normalize_weights
from .dataset import ClipSet, Trajectory, generate_synthetic, seconds_to_steps, segment_many
from .dynamics import kernels as K
from .dynamics.models import ModelDescriptor
from .dynamics.params import ParamSpace, ParamVector
from .errors import ConfigurationError, EvaluationFailedError
from .excitation import BezierCommandPlan, ExcitationConfig, PlanResult, default_template, optimize_plan, \
    plan_to_commands

HORIZON_SETTINGS = (0.05, 0.5, 1.0, 2.0)


# ------------------------------------------------------------------ data


def command_schedule(duration: float, dt: float, seed: int, gaits: Sequence[int] = (1,),
                     vx_range=(-0.2, 0.4), knot_seconds: float = 2.0, gait_seconds: float = 8.0,
                     base: CommandVector | None = None) -> list:
    """Per-tick commands: forward speed interpolated between random knots,
    gait drawn from ``gaits`` every ``gait_seconds``."""
    rng = np.random.default_rng(seed)
    base = base or CommandVector()
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    n_knots = int(math.ceil(duration / knot_seconds)) + 1
    knots = rng.uniform(*vx_range, size=n_knots)
    knots[0] = 0.0
    vx = np.interp(t, np.arange(n_knots) * knot_seconds, knots)
    n_blocks = int(math.ceil(duration / gait_seconds))
    block_gaits = rng.choice(np.asarray(gaits), size=n_blocks)
    out = []
    for k in range(n):
        g = int(block_gaits[min(int(t[k] // gait_seconds), n_blocks - 1)])
        out.append(base.with_gait(g).replace(vx=float(vx[k])))
    return out


def generate_stage1_data(cfg: PipelineConfig, model: ModelDescriptor | None = None,
                         theta_true: ParamVector | None = None) -> Trajectory:
    """Passive data: trot at randomly varying forward speed."""
    model = model or cfg.model()
    theta_true = theta_true or cfg.theta_true(model)
    dur = float(cfg.raw["data"]["stage1_seconds"])
    seed = cfg.seed("data")
    sched = command_schedule(dur, model.dt_control, seed, gaits=(1,))
    return generate_synthetic(theta_true, make_controller(model), sched, dur, cfg.noise(seed), model,
                              source_id=f"stage1-{seed}", stop_on_fall=True)


def generate_validation_data(cfg: PipelineConfig, model: ModelDescriptor | None = None,
                             theta_true: ParamVector | None = None) -> Trajectory:
    """Held-out data under a distinct schedule mixing trot and bound."""
    model = model or cfg.model()
    theta_true = theta_true or cfg.theta_true(model)
    dur = float(cfg.raw["data"]["validation_seconds"])
    seed = cfg.seed("validation")
    sched = command_schedule(dur, model.dt_control, seed, gaits=(1, 2))
    return generate_synthetic(theta_true, make_controller(model), sched, dur, cfg.noise(seed), model,
                              source_id=f"validation-{seed}", stop_on_fall=True)


def validation_clips(traj: Trajectory, seed: int = 0, mean_seconds: float = 1.5) -> ClipSet:
    h = seconds_to_steps(mean_seconds, traj.dt)
    return segment_many([traj], max(1, h // 2), h + h // 2, seed)


# ------------------------------------------------------------------ truth


def _iyy_com(theta: ParamVector) -> float:
    return float(theta.inertial().inertia_about_com()[1, 1])


def project_truth(theta_true: ParamVector, space: ParamSpace, model: ModelDescriptor) -> ParamVector:
    """Point of the searched subspace with the same planar dynamics as
    ``theta_true``: free coordinates copied, except a free ``d1`` which is
    solved so the pitch inertia about the CoM matches."""
    v = space.nominal.values.copy()
    v[space.free] = theta_true.values[space.free]
    proj = space.nominal.with_values(v)
    names = space.nominal.names()
    if model.kind != K.KIND_PLANAR_QUADRUPED or "d1" not in [names[i] for i in space.free]:
        return proj
    i = names.index("d1")
    target = _iyy_com(theta_true)
    lo, hi = -12.0, 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v[i] = mid
        if _iyy_com(proj.with_values(v)) < target:
            lo = mid
        else:
            hi = mid
    v[i] = 0.5 * (lo + hi)
    return proj.with_values(v)


def parameter_error(theta: ParamVector, truth: ParamVector, space: ParamSpace) -> float:
    """Euclidean distance in unit-box coordinates over the free set."""
    return space.normalized_error(theta, truth)


# ------------------------------------------------------------------ identification


@dataclass
class IdentResult:
    theta: ParamVector
    value: float
    history: list
    n_evaluations: int
    report: dict = field(default_factory=dict)
    weights: CostWeights | None = None
    space: ParamSpace | None = None
    clips: ClipSet | None = None
    reference: ClipSet | None = None

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.to_dict(),
            "value": self.value,
            "history": [list(h) for h in self.history],
            "n_evaluations": self.n_evaluations,
            "report": self.report,
            "weights": None if self.weights is None else self.weights.to_dict(),
            "free": None if self.space is None else self.space.free_names(),
        }


def identify(clips: ClipSet, weights: CostWeights, theta_reg: ParamVector, space: ParamSpace,
             model: ModelDescriptor, population: int, iterations: int, sigma0: float, seed: int,
             x0: ParamVector | None = None, workers: int = 1) -> IdentResult:
    """CMA-ES over the free coordinates of ``space`` minimising the total cost."""
    ev = CostEvaluator(clips, weights, theta_reg, model, workers)
    start = x0 or space.nominal
    if space.dim == 0 or iterations == 0:
        val = float(ev.totals([start])[0])
        return IdentResult(start, val, [(0, val, val)], 1, weights=weights, space=space, clips=clips)
    from .cmaes import CmaesConfig

    bounds = np.stack([space.lower[space.free], space.upper[space.free]], axis=1)
    xs = np.clip(space.free_values(start), bounds[:, 0], bounds[:, 1])
    ccfg = CmaesConfig(population=population, sigma0=sigma0, iterations=iterations, bounds=bounds, seed=seed)
    res: OptResult = minimize(None, xs, ccfg, batch_objective=lambda X: ev.totals([space.from_free(x) for x in X]))
    theta, value, n_evals = space.from_free(res.x), res.value, res.n_evaluations
    if x0 is not None:
        # a warm start is a candidate too: refinement never ends above it
        v0 = float(ev.totals([space.from_free(xs)])[0])
        n_evals += 1
        if v0 <= value:
            theta, value = space.from_free(xs), v0
    return IdentResult(theta, value, res.history, n_evals, weights=weights, space=space, clips=clips)


def _segment(cfg: PipelineConfig, trajs: Sequence[Trajectory], seed: int, h_min=None, h_max=None) -> ClipSet:
    seg = cfg.raw["segmentation"]
    dt = trajs[0].dt
    lo = seconds_to_steps(seg["h_min"] if h_min is None else h_min, dt)
    hi = seconds_to_steps(seg["h_max"] if h_max is None else h_max, dt)
    return segment_many(list(trajs), lo, max(lo, hi), seed)


def _term_report(ev_clips, weights, theta, theta_reg, model, workers) -> dict:
    try:
        return CostEvaluator(ev_clips, weights, theta_reg, model, workers).report(theta).to_dict()
    except EvaluationFailedError as exc:
        return {"error": str(exc)}


@dataclass
class Stage1Setup:
    clips: ClipSet  # identification clips
    reference: ClipSet
    weights: CostWeights
    theta0: ParamVector
    space: ParamSpace


def prepare_stage1(cfg: PipelineConfig, data: Sequence[Trajectory], model: ModelDescriptor,
                   h_min=None, h_max=None) -> Stage1Setup:
    """Segment the data, hold out the reference clips and normalise weights."""
    data = list(data or [])
    if not data or any(t.n_steps == 0 for t in data):
        raise ConfigurationError("stage-1 dataset is missing or empty")
    theta0 = cfg.theta0(model)
    space = cfg.space(model, theta0)
    clips = _segment(cfg, data, cfg.seed("segmentation"), h_min, h_max)
    if len(clips) < 2:
        raise ConfigurationError("stage-1 data yields fewer than two clips")
    ref, ident = clips.split(cfg.raw["data"]["reference_fraction"])
    weights = normalize_weights(cfg.weights(), ref, theta0, model)
    return Stage1Setup(ident, ref, weights, theta0, space)


def stage1_identify(cfg: PipelineConfig, data: Sequence[Trajectory] | None = None,
                    model: ModelDescriptor | None = None, h_min=None, h_max=None) -> IdentResult:
    """Segment, normalise weights on the reference clips, then search."""
    model = model or cfg.model()
    if data is None:
        data = [generate_stage1_data(cfg, model)]
    s = prepare_stage1(cfg, data, model, h_min, h_max)
    st = cfg.stage("stage1")
    res = identify(s.clips, s.weights, s.theta0, s.space, model, st.population, st.iterations, st.sigma0,
                   cfg.seed("cmaes"), workers=cfg.workers)
    res.reference = s.reference
    res.report = {
        "final": _term_report(s.clips, s.weights, res.theta, s.theta0, model, cfg.workers),
        "initial_total": float(CostEvaluator(s.clips, s.weights, s.theta0, model).totals([s.theta0])[0]),
        "n_clips": len(s.clips),
        "n_reference_clips": len(s.reference),
    }
    return res


def refine(cfg: PipelineConfig, theta_hat1: ParamVector, clips: ClipSet, weights: CostWeights,
           d1: Sequence[Trajectory], model: ModelDescriptor) -> IdentResult:
    """Stage-2 search on the stage-1 clips plus the new data, warm-started."""
    st = cfg.stage("stage2")
    theta0 = cfg.theta0(model)
    if st.iterations == 0:
        return IdentResult(theta_hat1, float("nan"), [], 0, weights=weights)
    new = _segment(cfg, list(d1), cfg.seed("segmentation") + 1)
    merged = clips + new
    space = cfg.space(model, theta0)
    ident = identify(merged, weights, theta0, space, model, st.population, st.iterations, st.sigma0,
                     cfg.seed("cmaes") + 1, x0=theta_hat1, workers=cfg.workers)
    ident.report = {"final": _term_report(merged, weights, ident.theta, theta0, model, cfg.workers),
                    "n_clips": len(merged), "n_new_clips": len(new)}
    return ident


@dataclass
class Stage2Result:
    theta: ParamVector
    plan: BezierCommandPlan | None
    plan_result: PlanResult | None
    data: Trajectory | None
    ident: IdentResult

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.to_dict(),
            "plan": None if self.plan is None else self.plan.to_dict(),
            "plan_result": None if self.plan_result is None else self.plan_result.to_dict(),
            "ident": self.ident.to_dict(),
        }


def excitation_config(cfg: PipelineConfig) -> ExcitationConfig:
    e = cfg.raw["excitation"]
    return ExcitationConfig(sigma=e["sigma"], n_seeds=e["n_seeds"], reg_relative=e["reg_relative"],
                            init_samples=e["init_samples"], rounds=e["rounds"])


def plan_template(cfg: PipelineConfig, model: ModelDescriptor) -> BezierCommandPlan:
    e = cfg.raw["excitation"]
    return default_template(model, e["n_segments"], e["n_points"], e["channels"], e["bounds"])


def design_plan(cfg: PipelineConfig, theta_hat: ParamVector, model: ModelDescriptor | None = None,
                mode: str | None = None) -> tuple:
    """``(plan, plan_result)``; ``mode`` "random" draws a random plan instead."""
    model = model or cfg.model()
    mode = mode or cfg.raw["excitation"]["mode"]
    template = plan_template(cfg, model)
    if mode == "random":
        rng = np.random.default_rng([cfg.seed("plan"), 99])
        return BezierCommandPlan.random(template, rng), None
    if mode != "active":
        raise ConfigurationError(f"unknown excitation mode {mode!r}")
    space = cfg.space(model).with_nominal(theta_hat)
    st = cfg.stage("plan")
    res = optimize_plan(theta_hat, make_controller(model), model, st.cmaes(cfg.seed("plan")), template,
                        space=space, config=excitation_config(cfg))
    return res.plan, res


def execute_plan(cfg: PipelineConfig, plan: BezierCommandPlan, model: ModelDescriptor | None = None,
                 theta_true: ParamVector | None = None) -> Trajectory:
    """Record the plan on the true system (synthetic)."""
    model = model or cfg.model()
    theta_true = theta_true or cfg.theta_true(model)
    seed = cfg.seed("data") + 500
    cmds = plan_to_commands(plan, model.dt_control)
    return generate_synthetic(theta_true, make_controller(model), cmds, len(cmds) * model.dt_control,
                              cfg.noise(seed), model, source_id=f"stage2-{seed}", stop_on_fall=True)


def stage2_active(cfg: PipelineConfig, theta_hat1: ParamVector, stage1: IdentResult | None = None,
                  d0: Sequence[Trajectory] | None = None, model: ModelDescriptor | None = None,
                  mode: str | None = None, plan: BezierCommandPlan | None = None) -> Stage2Result:
    """Design a plan at ``theta_hat1``, record it, and refine on D0 + D1
    starting from ``theta_hat1``."""
    model = model or cfg.model()
    st = cfg.stage("stage2")
    if st.iterations == 0:
        empty = IdentResult(theta_hat1, float("nan"), [], 0)
        return Stage2Result(theta_hat1, None, None, None, empty)
    if stage1 is None:
        setup = prepare_stage1(cfg, d0 if d0 is not None else [generate_stage1_data(cfg, model)], model)
        clips, weights = setup.clips, setup.weights
    else:
        clips, weights = stage1.clips, stage1.weights
    plan_result = None
    if plan is None:
        plan, plan_result = design_plan(cfg, theta_hat1, model, mode)
    d1 = execute_plan(cfg, plan, model)
    ident = refine(cfg, theta_hat1, clips, weights, [d1], model)
    return Stage2Result(ident.theta, plan, plan_result, d1, ident)


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class EvalMetrics:
    j_rpos: float
    j_pja: float
    j_rvel: float
    n_clips: int = 0
    n_diverged: int = 0
    baseline: str | None = None
    normalized: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in ("j_rpos", "j_pja", "j_rvel"):
            if not getattr(self, k) >= 0:
                raise EvaluationFailedError(f"{k} is not a non-negative number")

    def normalize(self, baseline: "EvalMetrics", name: str = "baseline") -> "EvalMetrics":
        def ratio(a, b):
            if b == 0:
                return 1.0 if a == 0 else math.inf
            return a / b

        norm = {k: ratio(getattr(self, k), getattr(baseline, k)) for k in ("j_rpos", "j_pja", "j_rvel")}
        return replace(self, baseline=name, normalized=norm)

    def to_dict(self) -> dict:
        return {"j_rpos": self.j_rpos, "j_pja": self.j_pja, "j_rvel": self.j_rvel, "n_clips": self.n_clips,
                "n_diverged": self.n_diverged, "baseline": self.baseline, "normalized": dict(self.normalized)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalMetrics":
        return cls(d["j_rpos"], d["j_pja"], d["j_rvel"], d.get("n_clips", 0), d.get("n_diverged", 0),
                   d.get("baseline"), dict(d.get("normalized", {})))


def evaluate_prediction(theta: ParamVector, validation: ClipSet, model: ModelDescriptor,
                        baseline: EvalMetrics | None = None, baseline_name: str = "baseline",
                        workers: int = 1) -> EvalMetrics:
    """Open-loop replay of each validation clip; means over clips and ticks."""
    ev = CostEvaluator(validation, CostWeights(), theta, model, workers)
    _, metrics, fail = ev.raw([theta])
    ok = fail[0] < 0
    n_bad = int((~ok).sum())
    if n_bad * 2 > len(validation):
        raise EvaluationFailedError(f"{n_bad} of {len(validation)} validation clips diverged")
    ticks = float(validation.horizons[ok].sum())
    m = metrics[0][ok].sum(axis=0) / ticks
    out = EvalMetrics(float(m[0]), float(m[1]), float(m[2]), len(validation), n_bad)
    return out.normalize(baseline, baseline_name) if baseline is not None else out


# ------------------------------------------------------------------ ablations


def run_horizon_ablation(cfg: PipelineConfig, data: Sequence[Trajectory] | None = None,
                         settings: Sequence = HORIZON_SETTINGS, uniform=(0.05, 2.0)) -> dict:
    """Final parameter error for each fixed horizon and for uniform sampling."""
    model = cfg.model()
    data = list(data) if data is not None else [generate_stage1_data(cfg, model)]
    truth = cfg.theta_true(model)
    space = cfg.space(model)
    target = project_truth(truth, space, model)
    rows = {}
    for h in settings:
        r = stage1_identify(cfg, data, model, h_min=h, h_max=h)
        rows[f"fixed_{h:g}"] = {"h_min": h, "h_max": h, "error": parameter_error(r.theta, target, space),
                                "theta": r.theta.to_dict()}
    r = stage1_identify(cfg, data, model, h_min=uniform[0], h_max=uniform[1])
    rows["uniform"] = {"h_min": uniform[0], "h_max": uniform[1], "error": parameter_error(r.theta, target, space),
                       "theta": r.theta.to_dict()}
    fixed = [v["error"] for k, v in rows.items() if k != "uniform"]
    return {"kind": "horizon", "settings": rows, "best_fixed": min(fixed) if fixed else None,
            "uniform": rows["uniform"]["error"]}


def run_motor_ablation(cfg: PipelineConfig, data: Sequence[Trajectory] | None = None,
                       validation: Trajectory | None = None,
                       kinds: Sequence = tuple(MotorModelKind)) -> dict:
    """Identify under each motor model on data from a grouped-tanh truth."""
    true_model = cfg.model(MotorModelKind.GROUPED_TANH)
    truth = cfg.theta_true(true_model)
    data = list(data) if data is not None else [generate_stage1_data(cfg, true_model, truth)]
    validation = validation or generate_validation_data(cfg, true_model, truth)
    vclips = validation_clips(validation, cfg.seed("segmentation"))
    rows = {}
    for kind in kinds:
        kind = MotorModelKind.parse(kind)
        m = true_model.with_motor_model(kind)
        sub = cfg.override(model={"motor_model": kind.value})
        r = stage1_identify(sub, data, m)
        space = sub.space(m)
        inertial = ParamSpace(space.nominal, space.lower, space.upper,
                              [i for i in space.free if i < 10])
        target = project_truth(sub.theta_true(m), inertial, m)
        try:
            metrics = evaluate_prediction(r.theta, vclips, m).to_dict()
        except EvaluationFailedError as exc:
            metrics = {"error": str(exc), "j_rpos": math.inf}
        rows[kind.value] = {"theta": r.theta.to_dict(), "metrics": metrics,
                            "inertial_error": parameter_error(r.theta, target, inertial)}
    return {"kind": "motor_model", "settings": rows}


def run_ablation(kind: str, cfg: PipelineConfig, **kw) -> dict:
    kind = kind.replace("-", "_")
    if kind == "horizon":
        return run_horizon_ablation(cfg, **kw)
    if kind == "motor_model":
        return run_motor_ablation(cfg, **kw)
    raise ConfigurationError(f"unknown ablation {kind!r}; choose horizon or motor-model")
