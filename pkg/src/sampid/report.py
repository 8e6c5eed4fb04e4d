"""End-to-end run writing a self-contained report directory."""
from __future__ import annotations

import json
import time
from pathlib import Path

from .cli import _write_history_csv, _write_json, _write_metrics_csv, save_theta
from .config import PipelineConfig
from .dataset import write_trajectory
from .errors import EvaluationFailedError
from .excitation import save_plan
from .pipeline import (evaluate_prediction, generate_stage1_data, generate_validation_data, parameter_error,
                       project_truth, stage1_identify, stage2_active, validation_clips)
from .plotting import plot_cost_curves, plot_overlay


def full_run(cfg: PipelineConfig, out: Path) -> dict:
    """Stage 1, stage 2 and validation metrics; returns the summary dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    model = cfg.model()
    cfg.save(out / "config.json")
    d0 = generate_stage1_data(cfg, model)
    val = generate_validation_data(cfg, model)
    write_trajectory(out / "stage1.jsonl", d0)
    write_trajectory(out / "validation.jsonl", val)

    s1 = stage1_identify(cfg, [d0], model)
    save_theta(out / "theta_stage1.json", s1.theta, model)
    _write_json(out / "stage1_report.json", s1.to_dict())

    s2 = stage2_active(cfg, s1.theta, s1, model=model)
    save_theta(out / "theta_active.json", s2.theta, model)
    _write_json(out / "stage2_report.json", s2.to_dict())
    if s2.plan is not None:
        save_plan(out / "plan.json", s2.plan)
    if s2.data is not None:
        write_trajectory(out / "stage2.jsonl", s2.data)

    theta0 = cfg.theta0(model)
    space = cfg.space(model, theta0)
    truth = project_truth(cfg.theta_true(model), space, model)
    vclips = validation_clips(val, cfg.seed("segmentation"))
    estimates = {"theta0": theta0, "stage1": s1.theta, "active": s2.theta, "truth": truth}
    base = evaluate_prediction(theta0, vclips, model, workers=cfg.workers)
    metrics = {}
    for name, th in estimates.items():
        try:
            metrics[name] = evaluate_prediction(th, vclips, model, base, "theta0", cfg.workers).to_dict()
        except EvaluationFailedError as exc:
            metrics[name] = {"error": str(exc), "j_rpos": float("nan"), "j_pja": float("nan"),
                             "j_rvel": float("nan")}
    errors = {name: parameter_error(th, truth, space) for name, th in estimates.items()}
    _write_json(out / "metrics.json", {"metrics": metrics, "parameter_error": errors})
    _write_metrics_csv(out / "metrics.csv", metrics)

    curves = {"stage1": s1.history, "stage2": s2.ident.history}
    if s2.plan_result is not None:
        curves["plan"] = s2.plan_result.history
    _write_history_csv(out / "cost_curves.csv", curves)
    plot_cost_curves({k: v for k, v in curves.items() if k != "plan"}, out / "cost_curves.svg")
    if "plan" in curves:
        plot_cost_curves({"plan": curves["plan"]}, out / "plan_objective.svg")
    plot_overlay({"theta0": theta0, "stage1": s1.theta, "active": s2.theta}, vclips, model,
                 out / "trajectory_overlay.svg")
    summary = {
        "output_dir": str(out),
        "seconds": time.time() - t_start,
        "parameter_error": errors,
        "j_rpos": {k: v["j_rpos"] for k, v in metrics.items()},
        "physical": {k: th.to_dict(list(model.group_names)).get("physical") for k, th in estimates.items()},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float))
    return summary
