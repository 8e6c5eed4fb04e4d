"""Command-line entry point: ``sampid <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig
from .dataset import Trajectory, read_trajectory, write_trajectory
from .dynamics.params import ParamVector
from .errors import (ConfigurationError, DivergenceError, EvaluationFailedError, ExcitationFailedError,
                     InvalidArgumentError, OptimizationFailedError, SensitivityFailedError)
from .excitation import save_plan

log = logging.getLogger("sampid")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (DivergenceError, EvaluationFailedError, OptimizationFailedError, SensitivityFailedError,
                  ExcitationFailedError)


# ------------------------------------------------------------------ file helpers


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, default=float))
    return path


def _read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"{path} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc


def load_theta(path) -> ParamVector:
    d = _read_json(path)
    return ParamVector.from_dict(d.get("theta", d))


def save_theta(path: Path, theta: ParamVector, model=None) -> Path:
    groups = None if model is None else list(model.group_names)
    return _write_json(path, theta.to_dict(groups))


def _load_traj(data_dir, name: str) -> Trajectory:
    p = Path(data_dir) / f"{name}.jsonl"
    if not p.exists():
        raise ConfigurationError(f"dataset {p} is missing; run gen-data first")
    return read_trajectory(p)


def _write_history_csv(path: Path, curves: dict) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "generation", "best", "mean"])
        for stage, hist in curves.items():
            for g, best, mean in hist:
                w.writerow([stage, int(g), best, mean])
    return path


def _write_metrics_csv(path: Path, rows: dict) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimate", "j_rpos", "j_pja", "j_rvel", "n_clips", "n_diverged",
                    "j_rpos_norm", "j_pja_norm", "j_rvel_norm"])
        for name, m in rows.items():
            n = m.get("normalized", {})
            w.writerow([name, m["j_rpos"], m["j_pja"], m["j_rvel"], m.get("n_clips", 0), m.get("n_diverged", 0),
                        n.get("j_rpos", ""), n.get("j_pja", ""), n.get("j_rvel", "")])
    return path


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ------------------------------------------------------------------ subcommands


def cmd_gen_data(args) -> int:
    from .pipeline import generate_stage1_data, generate_validation_data

    cfg = PipelineConfig.load(args.config)
    out = _out_dir(args.out)
    model = cfg.model()
    d0 = generate_stage1_data(cfg, model)
    val = generate_validation_data(cfg, model)
    write_trajectory(out / "stage1.jsonl", d0)
    write_trajectory(out / "validation.jsonl", val)
    cfg.save(out / "config.json")
    log.info("wrote %d + %d ticks to %s", d0.n_steps, val.n_steps, out)
    return EXIT_OK


def cmd_identify(args) -> int:
    from .pipeline import stage1_identify

    cfg = PipelineConfig.load(args.config)
    out = _out_dir(args.out)
    model = cfg.model()
    res = stage1_identify(cfg, [_load_traj(args.data, "stage1")], model)
    save_theta(out / "theta_stage1.json", res.theta, model)
    _write_json(out / "stage1_report.json", res.to_dict())
    curves = {"stage1": res.history}
    _write_history_csv(out / "cost_curves.csv", curves)
    from .plotting import plot_cost_curves

    plot_cost_curves(curves, out / "cost_curves.svg")
    print(json.dumps(res.theta.to_dict(list(model.group_names))["physical"], indent=2))
    return EXIT_OK


def cmd_excite(args) -> int:
    from .pipeline import design_plan, execute_plan

    cfg = PipelineConfig.load(args.config)
    out = _out_dir(args.out)
    model = cfg.model()
    theta = load_theta(args.theta)
    plan, res = design_plan(cfg, theta, model, args.mode)
    save_plan(out / "plan.json", plan)
    if res is not None:
        _write_json(out / "plan_report.json", res.to_dict())
    d1 = execute_plan(cfg, plan, model)
    write_trajectory(out / "stage2.jsonl", d1)
    return EXIT_OK


def cmd_refine(args) -> int:
    from .pipeline import prepare_stage1, refine

    cfg = PipelineConfig.load(args.config)
    out = _out_dir(args.out)
    model = cfg.model()
    theta = load_theta(args.theta)
    setup = prepare_stage1(cfg, [_load_traj(args.data, "stage1")], model)
    res = refine(cfg, theta, setup.clips, setup.weights, [_load_traj(args.data, "stage2")], model)
    save_theta(out / "theta_active.json", res.theta, model)
    _write_json(out / "stage2_report.json", res.to_dict())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .pipeline import EvalMetrics, evaluate_prediction, validation_clips

    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    theta = load_theta(args.theta)
    model = cfg.model(theta.motor_model)
    clips = validation_clips(_load_traj(args.data, "validation"), cfg.seed("segmentation"))
    baseline = None
    if args.baseline:
        b = _read_json(args.baseline)
        if "j_rpos" in b:
            baseline = EvalMetrics.from_dict(b)
        else:
            bt = ParamVector.from_dict(b.get("theta", b))
            baseline = evaluate_prediction(bt, clips, cfg.model(bt.motor_model))
    m = evaluate_prediction(theta, clips, model, baseline, Path(args.baseline).stem if args.baseline else None)
    print(json.dumps(m.to_dict(), indent=2))
    if args.out:
        out = _out_dir(args.out)
        _write_json(out / "metrics.json", m.to_dict())
        _write_metrics_csv(out / "metrics.csv", {"theta": m.to_dict()})
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .pipeline import run_ablation

    cfg = PipelineConfig.load(args.config)
    rep = run_ablation(args.kind, cfg)
    print(json.dumps({k: v for k, v in rep.items() if k != "settings"}, indent=2, default=float))
    if args.out:
        out = _out_dir(args.out)
        _write_json(out / f"ablation_{rep['kind']}.json", rep)
        from .plotting import plot_bars

        if rep["kind"] == "horizon":
            vals = {k: v["error"] for k, v in rep["settings"].items()}
            plot_bars(vals, out / "ablation_horizon.svg", "normalised parameter error")
        else:
            vals = {k: v["metrics"]["j_rpos"] for k, v in rep["settings"].items()}
            plot_bars(vals, out / "ablation_motor_model.svg", "validation J_rpos [m]")
    return EXIT_OK


def cmd_full_run(args) -> int:
    from .report import full_run

    cfg = PipelineConfig.load(args.config)
    summary = full_run(cfg, _out_dir(args.out))
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sampid", description="Sampling-based system identification "
                                                           "with active exploration.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="synthesise stage-1 and validation trajectories")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("identify", help="stage-1 identification")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("excite", help="optimise an excitation plan and record it")
    s.add_argument("--config", required=True)
    s.add_argument("--theta", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("active", "random"), default=None)
    s.set_defaults(func=cmd_excite)

    s = sub.add_parser("refine", help="stage-2 identification on stage-1 plus excitation data")
    s.add_argument("--config", required=True)
    s.add_argument("--theta", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("evaluate", help="prediction metrics on validation data")
    s.add_argument("--theta", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--baseline", default=None)
    s.add_argument("--config", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ablate", help="horizon or motor-model ablation")
    s.add_argument("--kind", required=True, choices=("horizon", "motor-model"))
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("full-run", help="both stages end to end with a report directory")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_full_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, InvalidArgumentError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
