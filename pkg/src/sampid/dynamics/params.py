"""Decision vectors: inertial log-Cholesky block plus actuator gains."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..actuator import MotorModelKind
from ..errors import ConfigurationError, InvalidArgumentError
from ..inertia import InertialParams, inertial_to_phi, phi_to_inertial

PHI_NAMES = ("alpha", "d1", "d2", "d3", "s12", "s23", "s13", "t1", "t2", "t3")


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter values with a named-slice layout.

    Rigid-body models use ``{"phi": 0:10, "kappa": 10:10+k}``; the number of
    gains ``k`` follows the motor-model variant.
    """

    values: np.ndarray
    layout: Mapping[str, slice]
    motor_model: MotorModelKind = MotorModelKind.GROUPED_TANH

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "layout", dict(self.layout))
        object.__setattr__(self, "motor_model", MotorModelKind.parse(self.motor_model))
        end = max((s.stop for s in self.layout.values()), default=0)
        if end != v.size:
            raise InvalidArgumentError(f"layout covers {end} entries, values have {v.size}")

    @classmethod
    def rigid(cls, inertial: InertialParams, kappa=(), motor_model=MotorModelKind.GROUPED_TANH):
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        phi = inertial_to_phi(inertial)
        layout = {"phi": slice(0, 10), "kappa": slice(10, 10 + kappa.size)}
        return cls(np.concatenate([phi, kappa]), layout, motor_model)

    @classmethod
    def scalar(cls, name: str, value: float):
        return cls([value], {name: slice(0, 1)}, MotorModelKind.IDEAL)

    def __len__(self):
        return self.values.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[self.layout[name]]

    @property
    def phi(self) -> np.ndarray:
        return self["phi"]

    @property
    def kappa(self) -> np.ndarray:
        return self["kappa"] if "kappa" in self.layout else np.zeros(0)

    def inertial(self) -> InertialParams:
        return phi_to_inertial(self.phi)

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values, self.layout, self.motor_model)

    def names(self) -> list:
        out = [None] * self.values.size
        for key, sl in self.layout.items():
            idx = range(sl.start, sl.stop)
            for k, i in enumerate(idx):
                if key == "phi":
                    out[i] = PHI_NAMES[k]
                elif sl.stop - sl.start == 1:
                    out[i] = key
                else:
                    out[i] = f"{key}[{k}]"
        return out

    def to_dict(self, group_names: Sequence[str] | None = None) -> dict:
        d = {
            "values": self.values.tolist(),
            "layout": {k: [s.start, s.stop] for k, s in self.layout.items()},
            "motor_model": self.motor_model.value,
        }
        if "phi" in self.layout:
            d["physical"] = self.inertial().as_dict()
            d["physical"]["kappa"] = self.kappa.tolist()
            if group_names is not None and self.motor_model is MotorModelKind.GROUPED_TANH:
                d["physical"]["kappa_groups"] = list(group_names)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParamVector":
        try:
            layout = {k: slice(int(a), int(b)) for k, (a, b) in d["layout"].items()}
            return cls(d["values"], layout, d.get("motor_model", "grouped_tanh"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed parameter record: {exc}") from exc


@dataclass(frozen=True)
class ParamSpace:
    """Box bounds over a :class:`ParamVector` and the subset being searched.

    The optimiser sees only the ``free`` coordinates, normalised to [0, 1].
    Fixed coordinates stay at their nominal values.
    """

    nominal: ParamVector
    lower: np.ndarray
    upper: np.ndarray
    free: np.ndarray = field(default=None)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).copy()
        hi = np.asarray(self.upper, dtype=float).copy()
        n = len(self.nominal)
        if lo.shape != (n,) or hi.shape != (n,):
            raise ConfigurationError("bounds do not match the parameter layout")
        free = np.arange(n) if self.free is None else np.asarray(self.free, dtype=int)
        if free.size and np.any(lo[free] >= hi[free]):
            bad = [self.nominal.names()[i] for i in free if lo[i] >= hi[i]]
            raise ConfigurationError(f"empty bound interval for {bad}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "free", free)

    @property
    def dim(self) -> int:
        return int(self.free.size)

    @property
    def width(self) -> np.ndarray:
        return (self.upper - self.lower)[self.free]

    def free_names(self) -> list:
        names = self.nominal.names()
        return [names[i] for i in self.free]

    def to_unit(self, theta: ParamVector) -> np.ndarray:
        v = theta.values[self.free]
        return (v - self.lower[self.free]) / self.width

    def from_unit(self, u) -> ParamVector:
        u = np.asarray(u, dtype=float)
        v = self.nominal.values.copy()
        v[self.free] = self.lower[self.free] + u * self.width
        return self.nominal.with_values(v)

    def from_free(self, x) -> ParamVector:
        v = self.nominal.values.copy()
        v[self.free] = np.asarray(x, dtype=float)
        return self.nominal.with_values(v)

    def free_values(self, theta: ParamVector) -> np.ndarray:
        return theta.values[self.free].copy()

    def contains(self, theta: ParamVector, tol: float = 1e-12) -> bool:
        v = theta.values[self.free]
        return bool(np.all(v >= self.lower[self.free] - tol) and np.all(v <= self.upper[self.free] + tol))

    def normalized_error(self, a: ParamVector, b: ParamVector) -> float:
        """Euclidean distance in unit-box coordinates over the free set."""
        return float(np.linalg.norm(self.to_unit(a) - self.to_unit(b)))

    def with_nominal(self, nominal: ParamVector) -> "ParamSpace":
        return ParamSpace(nominal, self.lower, self.upper, self.free)

    def with_free(self, free) -> "ParamSpace":
        return ParamSpace(self.nominal, self.lower, self.upper, free)


def rigid_bounds(nominal: ParamVector, *, mass, com, inertia_diag, kappa=None,
                 linear_gain=None, offdiag_scale: float = 0.5):
    """Box bounds in log-Cholesky coordinates from physical sampling ranges.

    ``mass`` and ``com`` translate exactly (``mass = exp(2 alpha)``,
    ``com = t``).  The diagonal log-factors ``d`` get the range of
    ``0.5 log(I / m)`` spanned by the inertia-diagonal and mass bounds; the
    off-diagonal factors get ``+-offdiag_scale * sqrt(I_max / m_min)``.
    """
    m_lo, m_hi = (float(x) for x in mass)
    c_lo, c_hi = (np.broadcast_to(np.asarray(c, dtype=float), (3,)) for c in com)
    i_lo, i_hi = (np.broadcast_to(np.asarray(c, dtype=float), (3,)) for c in inertia_diag)
    lo = np.empty(len(nominal))
    hi = np.empty(len(nominal))
    lo[0], hi[0] = 0.5 * np.log(m_lo), 0.5 * np.log(m_hi)
    lo[1:4] = 0.5 * np.log(i_lo / m_hi)
    hi[1:4] = 0.5 * np.log(i_hi / m_lo)
    s = offdiag_scale * np.sqrt(i_hi.max() / m_lo)
    lo[4:7], hi[4:7] = -s, s
    lo[7:10], hi[7:10] = c_lo, c_hi
    k = nominal.layout.get("kappa", slice(10, 10))
    nk = k.stop - k.start
    if nk:
        rng = linear_gain if nominal.motor_model is MotorModelKind.LINEAR_GAIN else kappa
        if rng is None:
            raise ConfigurationError(f"bounds for {nominal.motor_model.value} gains are missing")
        lo[k], hi[k] = float(rng[0]), float(rng[1])
    return lo, hi
