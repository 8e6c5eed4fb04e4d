"""Run configuration: JSON sections resolved into library objects."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actuator import MotorModelKind
from .cmaes import CmaesConfig
from .cost import CostWeights
from .dataset import NoiseSpec
from .dynamics.models import ModelDescriptor, make_model
from .dynamics.params import ParamSpace, ParamVector, rigid_bounds
from .errors import ConfigurationError
from .inertia import InertialParams, inertia_about_origin

# Go2 base-link sampling ranges used as identification bounds
DEFAULT_BOUNDS = {
    "mass": [3.0, 15.0],
    "com": [-0.1, 0.1],
    "inertia_diag": [0.005, 1.0],
    "kappa": [10.0, 40.0],
    "linear_gain": [0.5, 1.5],
    "free": None,
}

# Go2 with a rear payload; the inertia is given about the CoM
PAYLOAD = {
    "mass": 9.363,
    "com": [0.004, -0.005, -0.020],
    "inertia_com": [0.391, 0.515, 0.396],
    "kappa": {"hip": 22.553, "thigh": 24.969, "calf": 23.523},
}

DEFAULTS = {
    "model": {"name": "planar_quadruped", "motor_model": "grouped_tanh"},
    "scenario": "payload",
    "theta0": None,
    "bounds": DEFAULT_BOUNDS,
    "cost": {},
    "cmaes": {
        "stage1": {"population": 64, "iterations": 60, "sigma0": 0.3},
        "stage2": {"population": 32, "iterations": 30, "sigma0": 0.03},
        "plan": {"population": 8, "iterations": 10, "sigma0": 0.3},
    },
    "segmentation": {"h_min": 0.05, "h_max": 2.0},
    "excitation": {
        "n_segments": 2,
        "n_points": 11,
        "channels": None,
        "bounds": None,
        "sigma": 1.0,
        "n_seeds": 1,
        "reg_relative": 1e-6,
        "init_samples": 16,
        "rounds": 2,
        "mode": "active",
    },
    "noise": "encoder",
    "data": {"stage1_seconds": 120.0, "validation_seconds": 60.0, "reference_fraction": 0.1},
    "seeds": {"data": 0, "validation": 1000, "segmentation": 0, "cmaes": 0, "plan": 0},
    "workers": 1,
    "output_dir": "runs/latest",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class StageSettings:
    population: int = 64
    iterations: int = 60
    sigma0: float = 0.3

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.iterations and self.population < 4:
            raise ConfigurationError("population must be at least 4")

    def cmaes(self, seed: int) -> CmaesConfig:
        return CmaesConfig(population=self.population, sigma0=self.sigma0, iterations=max(1, self.iterations),
                           seed=seed)


@dataclass
class PipelineConfig:
    """Resolved run configuration; ``raw`` keeps the merged JSON sections."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        self.raw = _merge(DEFAULTS, self.raw)
        unknown = set(self.raw) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(f"unknown config sections {sorted(unknown)}")
        seg = self.raw["segmentation"]
        if not 0 < seg["h_min"] <= seg["h_max"]:
            raise ConfigurationError("segmentation needs 0 < h_min <= h_max")
        frac = self.raw["data"]["reference_fraction"]
        if not 0 < frac < 1:
            raise ConfigurationError("reference_fraction must lie in (0, 1)")
        # resolve eagerly so malformed sections fail at load time
        self.model()
        self.space()
        self.weights()
        self.noise()
        for k in ("stage1", "stage2", "plan"):
            self.stage(k)

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "PipelineConfig":
        return cls(copy.deepcopy(d or {}))

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def override(self, **sections) -> "PipelineConfig":
        return PipelineConfig(_merge(self.raw, sections))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.raw, indent=2))
        return path

    # -- resolved objects -------------------------------------------

    def model(self, motor_model=None) -> ModelDescriptor:
        m = self.raw["model"]
        kw = {}
        if m["name"] != "linear_1d":
            kw["motor_model"] = MotorModelKind.parse(motor_model or m.get("motor_model", "grouped_tanh"))
        return make_model(m["name"], **kw)

    def theta0(self, model: ModelDescriptor | None = None) -> ParamVector:
        model = model or self.model()
        t0 = self.raw["theta0"]
        if t0 is None:
            return model.default_theta()
        return theta_from_physical(t0, model)

    def theta_true(self, model: ModelDescriptor | None = None) -> ParamVector:
        model = model or self.model()
        sc = self.raw["scenario"]
        if sc == "payload":
            return payload_theta(model)
        if sc == "nominal":
            return self.theta0(model)
        if isinstance(sc, dict):
            return theta_from_physical(sc, model)
        raise ConfigurationError(f"unknown scenario {sc!r}")

    def space(self, model: ModelDescriptor | None = None, nominal: ParamVector | None = None) -> ParamSpace:
        model = model or self.model()
        nominal = nominal or self.theta0(model)
        b = self.raw["bounds"]
        if model.name == "linear_1d":
            lo, hi = np.array([b.get("gain", [0.0, 1.0])[0]]), np.array([b.get("gain", [0.0, 1.0])[1]])
        else:
            lo, hi = rigid_bounds(nominal, mass=b["mass"], com=b["com"], inertia_diag=b["inertia_diag"],
                                  kappa=b.get("kappa"), linear_gain=b.get("linear_gain"))
        free = model.free_indices(nominal, b.get("free"))
        # zero-width intervals pin a parameter at its lower bound
        free = np.array([i for i in free if hi[i] > lo[i]], dtype=int)
        bad = [nominal.names()[i] for i in free if not lo[i] <= nominal.values[i] <= hi[i]]
        if bad:
            raise ConfigurationError(f"theta0 lies outside the bounds for {bad}")
        return ParamSpace(nominal, lo, hi, free)

    def weights(self) -> CostWeights:
        return CostWeights.from_dict(self.raw["cost"])

    def noise(self, seed: int = 0) -> NoiseSpec:
        n = self.raw["noise"]
        if n in (None, "none"):
            return NoiseSpec(seed=seed)
        if n == "encoder":
            return NoiseSpec.encoder_level(seed)
        if isinstance(n, dict):
            return NoiseSpec(**{**n, "seed": seed})
        raise ConfigurationError(f"unknown noise setting {n!r}")

    def stage(self, name: str) -> StageSettings:
        try:
            return StageSettings(**self.raw["cmaes"][name])
        except TypeError as exc:
            raise ConfigurationError(f"bad cmaes.{name} section: {exc}") from exc

    def seed(self, name: str) -> int:
        return int(self.raw["seeds"].get(name, 0))

    @property
    def workers(self) -> int:
        return int(self.raw["workers"])


def theta_from_physical(d: dict, model: ModelDescriptor) -> ParamVector:
    """Parameter vector from ``mass``/``com``/``inertia`` (about the origin)
    or ``inertia_com`` entries plus gains."""
    if "values" in d:
        return ParamVector.from_dict(d)
    if model.name == "linear_1d":
        return ParamVector.scalar("gain", float(d["gain"]))
    try:
        mass = float(d["mass"])
        com = np.asarray(d["com"], dtype=float)
        if "inertia_com" in d:
            I = inertia_about_origin(mass, com, np.diag(d["inertia_com"]) if np.ndim(d["inertia_com"]) == 1
                                     else np.asarray(d["inertia_com"], dtype=float))
        else:
            I = np.diag(d["inertia"]) if np.ndim(d["inertia"]) == 1 else np.asarray(d["inertia"], dtype=float)
    except KeyError as exc:
        raise ConfigurationError(f"physical parameter record lacks {exc}") from exc
    kap = d.get("kappa", 25.0)
    if isinstance(kap, dict):
        kap = [kap[g] for g in model.group_names]
    n = model.motor_model.n_gains(model.n_groups)
    kap = np.broadcast_to(np.asarray(kap, dtype=float), (n,)) if n else np.zeros(0)
    return ParamVector.rigid(InertialParams(mass, com, I), kap, model.motor_model)


def payload_theta(model: ModelDescriptor) -> ParamVector:
    """Payload ground truth.  The planar hip and knee groups take the thigh
    and calf gains of the real robot."""
    d = {"mass": PAYLOAD["mass"], "com": PAYLOAD["com"], "inertia_com": PAYLOAD["inertia_com"]}
    kind = model.motor_model
    if kind is MotorModelKind.GROUPED_TANH:
        d["kappa"] = [PAYLOAD["kappa"]["thigh"], PAYLOAD["kappa"]["calf"]]
    elif kind is MotorModelKind.UNIFIED_TANH:
        d["kappa"] = [np.mean([PAYLOAD["kappa"]["thigh"], PAYLOAD["kappa"]["calf"]])]
    elif kind is MotorModelKind.LINEAR_GAIN:
        d["kappa"] = [1.0]
    return theta_from_physical(d, model)
