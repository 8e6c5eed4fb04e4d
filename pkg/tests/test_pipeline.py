import json

import numpy as np
import pytest

from sampid.config import PAYLOAD, PipelineConfig, payload_theta
from sampid.controller import make_controller
from sampid.dataset import generate_synthetic
from sampid.errors import ConfigurationError, EvaluationFailedError
from sampid.pipeline import (EvalMetrics, _iyy_com, command_schedule, evaluate_prediction, generate_stage1_data,
                             generate_validation_data, parameter_error, project_truth, run_ablation,
                             run_horizon_ablation, stage1_identify, stage2_active, validation_clips)

TINY = {
    "data": {"stage1_seconds": 8.0, "validation_seconds": 6.0},
    "cmaes": {"stage1": {"population": 8, "iterations": 3}, "stage2": {"population": 8, "iterations": 2},
              "plan": {"population": 4, "iterations": 2}},
    "segmentation": {"h_min": 0.2, "h_max": 1.0},
    "excitation": {"n_segments": 1, "init_samples": 2, "rounds": 1},
}


def _cfg(**over):
    d = json.loads(json.dumps(TINY))
    for k, v in over.items():
        d[k] = {**d.get(k, {}), **v} if isinstance(v, dict) and isinstance(d.get(k), dict) else v
    return PipelineConfig.from_dict(d)


# ------------------------------------------------------------------ config


def test_config_roundtrip_and_errors(tmp_path):
    cfg = _cfg()
    back = PipelineConfig.load(cfg.save(tmp_path / "c.json"))
    assert back.to_dict() == cfg.to_dict()
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"bogus": {}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"segmentation": {"h_min": 2.0, "h_max": 1.0}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(tmp_path / "missing.json")
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"model": {"name": "hexapod"}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"bounds": {"mass": [8.0, 12.0]}})  # nominal mass outside


def test_payload_truth_matches_table_values():
    cfg = PipelineConfig()
    th = payload_theta(cfg.model())
    ip = th.inertial()
    assert ip.mass == pytest.approx(PAYLOAD["mass"], rel=1e-12)
    assert np.allclose(ip.com, PAYLOAD["com"], atol=1e-12)
    assert np.allclose(np.diag(ip.inertia_about_com()), PAYLOAD["inertia_com"], atol=1e-10)
    assert np.allclose(th.kappa, [PAYLOAD["kappa"]["thigh"], PAYLOAD["kappa"]["calf"]])


def test_project_truth_keeps_pitch_inertia():
    cfg = PipelineConfig()
    m = cfg.model()
    sp = cfg.space(m)
    truth = cfg.theta_true(m)
    proj = project_truth(truth, sp, m)
    assert _iyy_com(proj) == pytest.approx(_iyy_com(truth), rel=1e-9)
    assert proj.inertial().mass == pytest.approx(truth.inertial().mass, rel=1e-12)
    assert parameter_error(proj, proj, sp) == 0.0


# ------------------------------------------------------------------ stage 1


def test_zero_width_bounds_return_truth():
    cfg = _cfg(scenario="nominal", noise="none",
               bounds={"kappa": [25.0, 25.0], "free": ["kappa"]})
    r = stage1_identify(cfg)
    assert np.array_equal(r.theta.values, cfg.theta0().values)
    assert r.value == pytest.approx(0.0, abs=1e-9)


def test_stage1_deterministic():
    cfg = _cfg()
    m = cfg.model()
    data = [generate_stage1_data(cfg, m)]
    a = stage1_identify(cfg, data, m)
    b = stage1_identify(cfg, data, m)
    assert np.array_equal(a.theta.values, b.theta.values)
    assert a.history == b.history
    assert a.report["n_reference_clips"] >= 1


def test_empty_dataset_is_configuration_error():
    cfg = _cfg()
    with pytest.raises(ConfigurationError):
        stage1_identify(cfg, [], cfg.model())


def test_identification_smoke_mass_and_gains():
    """Mass scale and both gains from 10 noiseless clips.  Five generations
    leave the weakly excited hip gain unconverged, so this runs twenty."""
    base = PipelineConfig()
    m = base.model()
    th0 = base.theta0(m)
    v = th0.values.copy()
    names = th0.names()
    v[names.index("alpha")] += 0.5 * np.log(1.2)
    v[[i for i, n in enumerate(names) if n.startswith("kappa")]] = [17.0, 15.0]
    truth = th0.with_values(v)
    cfg = _cfg(scenario=truth.to_dict(), noise="none", segmentation={"h_min": 1.0, "h_max": 1.0},
               bounds={"free": ["alpha", "kappa"]},
               cmaes={"stage1": {"population": 64, "iterations": 20, "sigma0": 0.3}})
    # bound and pronk load the joints hard enough to bring out the saturation
    sched = command_schedule(11.0, m.dt_control, 3, gaits=(2, 3), vx_range=(0.0, 0.6), gait_seconds=4.0)
    data = generate_synthetic(truth, make_controller(m), sched, 11.0, cfg.noise(0), m)
    r = stage1_identify(cfg, [data], m)
    assert r.report["n_clips"] == 10
    mass_err = abs(r.theta.inertial().mass / truth.inertial().mass - 1.0)
    kap_err = np.abs(r.theta.kappa / truth.kappa - 1.0)
    assert mass_err < 0.02 and kap_err[1] < 0.02, (mass_err, kap_err)
    assert kap_err[0] < 0.10


# ------------------------------------------------------------------ stage 2


def test_zero_stage2_budget_returns_stage1():
    cfg = _cfg(cmaes={"stage2": {"population": 8, "iterations": 0}})
    m = cfg.model()
    th = cfg.theta0(m)
    r = stage2_active(cfg, th, model=m)
    assert r.theta is th and r.plan is None


def test_stage2_runs_and_is_deterministic():
    cfg = _cfg()
    m = cfg.model()
    s1 = stage1_identify(cfg, model=m)
    a = stage2_active(cfg, s1.theta, s1, model=m)
    b = stage2_active(cfg, s1.theta, s1, model=m)
    assert np.array_equal(a.theta.values, b.theta.values)
    assert a.plan.gaits == b.plan.gaits
    assert a.data.n_steps > 0
    r = stage2_active(cfg, s1.theta, s1, model=m, mode="random")
    assert r.plan_result is None and r.data.n_steps > 0
    with pytest.raises(ConfigurationError):
        stage2_active(cfg, s1.theta, s1, model=m, mode="sideways")


# ------------------------------------------------------------------ metrics


@pytest.fixture(scope="module")
def clean_validation():
    cfg = _cfg(noise="none")
    m = cfg.model()
    val = generate_validation_data(cfg, m)
    return cfg, m, validation_clips(val, 0)


def test_metrics_zero_at_truth(clean_validation):
    cfg, m, vc = clean_validation
    e = evaluate_prediction(cfg.theta_true(m), vc, m)
    assert e.j_rpos == 0.0 and e.j_pja == 0.0 and e.j_rvel == 0.0
    assert e.n_diverged == 0 and e.n_clips == len(vc)


def test_normalized_baseline_is_one(clean_validation):
    cfg, m, vc = clean_validation
    base = evaluate_prediction(cfg.theta0(m), vc, m)
    again = evaluate_prediction(cfg.theta0(m), vc, m, baseline=base, baseline_name="theta0")
    assert again.normalized == {"j_rpos": 1.0, "j_pja": 1.0, "j_rvel": 1.0}
    assert again.baseline == "theta0"
    assert EvalMetrics.from_dict(again.to_dict()) == again


def test_metrics_order_truth_below_nominal(clean_validation):
    cfg, m, vc = clean_validation
    assert evaluate_prediction(cfg.theta0(m), vc, m).j_rpos > 0.0


def test_mostly_divergent_validation_raises(clean_validation):
    cfg, m, vc = clean_validation
    th = cfg.theta0(m)
    v = th.values.copy()
    v[0] = -30.0
    with pytest.raises(EvaluationFailedError):
        evaluate_prediction(th.with_values(v), vc, m)


# ------------------------------------------------------------------ ablations


def test_single_setting_ablation_is_stage1():
    cfg = _cfg()
    m = cfg.model()
    data = [generate_stage1_data(cfg, m)]
    rep = run_horizon_ablation(cfg, data, settings=(), uniform=(0.2, 1.0))
    r = stage1_identify(cfg, data, m)
    target = project_truth(cfg.theta_true(m), cfg.space(m), m)
    assert rep["uniform"] == parameter_error(r.theta, target, cfg.space(m))
    assert rep["best_fixed"] is None
    with pytest.raises(ConfigurationError):
        run_ablation("friction", cfg)
