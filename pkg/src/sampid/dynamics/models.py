"""Built-in model descriptors and their parameter packing."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from ..actuator import MotorModelKind, SaturationGains
from ..errors import ConfigurationError
from ..inertia import InertialParams
from . import kernels as K
from .params import ParamVector
from .state import SimState, pitch_quat


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 2.0e4
    damping: float = 200.0
    friction: float = 0.8
    tangential_damping: float = 3000.0

    def __post_init__(self):
        if self.stiffness < 0 or self.damping < 0 or self.tangential_damping < 0:
            raise ConfigurationError("contact stiffness/damping must be non-negative")


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    kind: int
    n_joints: int
    joint_names: tuple
    joint_groups: tuple
    group_names: tuple
    dt_physics: float
    dt_control: float
    torque_limit: float = 45.0
    gravity: float = 9.81
    contact: ContactParams = field(default_factory=ContactParams)
    kp: tuple = ()
    kd: tuple = ()
    motor_model: MotorModelKind = MotorModelKind.GROUPED_TANH
    joint_lower: tuple = ()
    joint_upper: tuple = ()
    geometry: Mapping = field(default_factory=dict)
    fall_height: float = -np.inf
    fall_pitch: float = np.inf
    # parameter names left free by default during identification
    identifiable: tuple = ()

    def __post_init__(self):
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigurationError("dt_control must be an integer multiple of dt_physics")
        if len(self.joint_groups) != self.n_joints:
            raise ConfigurationError("every joint needs exactly one group")
        object.__setattr__(self, "motor_model", MotorModelKind.parse(self.motor_model))
        object.__setattr__(self, "geometry", dict(self.geometry))

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_physics))

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def state_dim(self) -> int:
        return 13 + 2 * self.n_joints

    def with_(self, **changes) -> "ModelDescriptor":
        return replace(self, **changes)

    def with_motor_model(self, kind) -> "ModelDescriptor":
        return replace(self, motor_model=MotorModelKind.parse(kind))

    # -- kernel packing -------------------------------------------------

    def consts(self) -> np.ndarray:
        c = np.zeros(K.N_CONSTS)
        c[K.C_DT] = self.dt_physics
        c[K.C_NSUB] = self.substeps
        c[K.C_G] = self.gravity
        c[K.C_TLIM] = self.torque_limit
        c[K.C_MOTOR] = self.motor_model.code
        g = self.geometry
        if self.kind == K.KIND_PLANAR_QUADRUPED:
            c[K.C_K] = self.contact.stiffness
            c[K.C_C] = self.contact.damping
            c[K.C_MU] = self.contact.friction
            c[K.C_CT] = self.contact.tangential_damping
            c[K.C_L1] = g["thigh_length"]
            c[K.C_L2] = g["calf_length"]
            c[K.C_HIPF] = g["hip_x"][0]
            c[K.C_HIPR] = g["hip_x"][1]
            c[K.C_ARM] = g["armature"]
            c[K.C_JDAMP] = g.get("joint_damping", 0.0)
        elif self.kind == K.KIND_DOUBLE_PENDULUM:
            c[K.C_PL1] = g["link1_length"]
            c[K.C_PM1] = g["link1_mass"]
            c[K.C_PR1X] = g["link1_com"][0]
            c[K.C_PR1Z] = g["link1_com"][1]
            c[K.C_PI1] = g["link1_inertia"]
            c[K.C_PJDAMP] = g.get("joint_damping", 0.0)
        return c

    def gains(self):
        kp = np.broadcast_to(np.asarray(self.kp, dtype=float), (self.n_joints,)).copy()
        kd = np.broadcast_to(np.asarray(self.kd, dtype=float), (self.n_joints,)).copy()
        return kp, kd

    def pack(self, theta: ParamVector):
        """Kernel arrays ``(phys, kappa_per_joint)`` for one parameter vector."""
        phys = np.zeros(K.N_PHYS)
        if self.kind == K.KIND_LINEAR_1D:
            phys[0] = theta.values[0]
            return phys, np.ones(self.n_joints)
        if theta.motor_model is not self.motor_model:
            raise ConfigurationError(
                f"parameter vector uses {theta.motor_model.value}, model expects {self.motor_model.value}"
            )
        ip = theta.inertial()
        phys[0] = ip.mass
        phys[1:4] = ip.com
        phys[4:13] = ip.inertia.reshape(-1)
        kap = theta.kappa
        need = self.motor_model.n_gains(self.n_groups)
        if kap.size != need:
            raise ConfigurationError(f"{self.motor_model.value} needs {need} gains, got {kap.size}")
        if self.motor_model is MotorModelKind.IDEAL:
            per_joint = np.ones(self.n_joints)
        elif self.motor_model is MotorModelKind.GROUPED_TANH:
            per_joint = SaturationGains(kap, self.joint_groups).per_joint(self.n_joints)
        else:
            per_joint = np.full(self.n_joints, kap[0])
        return phys, per_joint

    def pack_many(self, thetas):
        phys = np.empty((len(thetas), K.N_PHYS))
        kap = np.empty((len(thetas), max(self.n_joints, 1)))
        for i, th in enumerate(thetas):
            phys[i], kap[i, : self.n_joints] = self.pack(th)
        return phys, kap

    # -- helpers --------------------------------------------------------

    def frozen_mask(self) -> np.ndarray:
        """Boolean mask over the state vector of DoFs the model never moves."""
        m = np.zeros(self.state_dim, dtype=bool)
        if self.kind == K.KIND_PLANAR_QUADRUPED:
            m[[1, 4, 6, 8, 10, 12]] = True
        else:
            m[:13] = True
        if self.kind == K.KIND_LINEAR_1D:
            m[14] = True
        return m

    def default_theta(self, kappa=None) -> ParamVector:
        g = self.geometry
        if self.kind == K.KIND_LINEAR_1D:
            return ParamVector.scalar("gain", g.get("gain", 0.9))
        ip = InertialParams(g["nominal_mass"], g["nominal_com"], g["nominal_inertia"])
        n = self.motor_model.n_gains(self.n_groups)
        if kappa is None:
            kappa = 1.0 if self.motor_model is MotorModelKind.LINEAR_GAIN else 25.0
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n,)) if n else np.zeros(0)
        return ParamVector.rigid(ip, kappa, self.motor_model)

    def free_indices(self, theta: ParamVector, names=None) -> np.ndarray:
        names = self.identifiable if names is None else names
        all_names = theta.names()
        if not names:
            return np.arange(len(all_names))
        out = []
        for i, nm in enumerate(all_names):
            base = nm.split("[")[0]
            if nm in names or base in names:
                out.append(i)
        return np.asarray(out, dtype=int)


GO2_DEFAULT_MASS = 6.921
GO2_DEFAULT_COM = (0.021, 0.0, -0.005)
GO2_DEFAULT_INERTIA = (0.025, 0.098, 0.107)


def make_planar_quadruped(motor_model=MotorModelKind.GROUPED_TANH, **overrides) -> ModelDescriptor:
    """Sagittal-plane quadruped: floating base in x-z with pitch, two 2-link
    massless legs (front, rear) with hip and knee joints and point feet.

    Each planar leg stands for a left/right pair of the real robot.  Base
    nominal inertials follow the Go2 defaults.
    """
    geometry = {
        "thigh_length": 0.213,
        "calf_length": 0.213,
        "hip_x": (0.1934, -0.1934),
        "armature": 0.02,
        "joint_damping": 0.0,
        "nominal_mass": GO2_DEFAULT_MASS,
        "nominal_com": GO2_DEFAULT_COM,
        "nominal_inertia": GO2_DEFAULT_INERTIA,
        "stand_q": (0.8, -1.5, 0.8, -1.5),
    }
    geometry.update(overrides.pop("geometry", {}))
    kw = dict(
        name="planar_quadruped",
        kind=K.KIND_PLANAR_QUADRUPED,
        n_joints=4,
        joint_names=("front_hip", "front_knee", "rear_hip", "rear_knee"),
        joint_groups=(0, 1, 0, 1),
        group_names=("hip", "knee"),
        dt_physics=1e-3,
        dt_control=0.02,
        torque_limit=45.0,
        gravity=9.81,
        contact=ContactParams(),
        # one planar leg lumps a left/right pair, hence twice the Go2 gains
        kp=(40.0,) * 4,
        kd=(1.0,) * 4,
        motor_model=motor_model,
        joint_lower=(-1.5, -2.7, -1.5, -2.7),
        joint_upper=(3.4, -0.84, 3.4, -0.84),
        geometry=geometry,
        fall_height=0.12,
        fall_pitch=1.0,
        # sagittal-plane observable directions: mass, pitch inertia, CoM x/z
        identifiable=("alpha", "d1", "t1", "t3", "kappa"),
    )
    kw.update(overrides)
    return ModelDescriptor(**kw)


def make_double_pendulum(motor_model=MotorModelKind.GROUPED_TANH, **overrides) -> ModelDescriptor:
    """Fixed-base planar double pendulum; link 2 is the identified body.

    Link 2's frame sits at the elbow joint; its nominal inertials are a
    uniform 0.5 m rod of 1 kg hanging along -z.
    """
    geometry = {
        "link1_length": 0.5,
        "link1_mass": 1.0,
        "link1_com": (0.0, -0.25),
        "link1_inertia": 1.0 * 0.5 ** 2 / 3.0,
        "joint_damping": 0.0,
        "nominal_mass": 1.0,
        "nominal_com": (0.0, 0.0, -0.25),
        "nominal_inertia": (1.0 * 0.5 ** 2 / 3.0 + 1e-3, 1.0 * 0.5 ** 2 / 3.0 + 1e-3, 2e-3),
    }
    geometry.update(overrides.pop("geometry", {}))
    kw = dict(
        name="double_pendulum",
        kind=K.KIND_DOUBLE_PENDULUM,
        n_joints=2,
        joint_names=("shoulder", "elbow"),
        joint_groups=(0, 1),
        group_names=("shoulder", "elbow"),
        dt_physics=1e-3,
        dt_control=0.02,
        torque_limit=45.0,
        kp=(20.0, 20.0),
        kd=(0.5, 0.5),
        motor_model=motor_model,
        joint_lower=(-np.pi, -np.pi),
        joint_upper=(np.pi, np.pi),
        geometry=geometry,
        identifiable=("alpha", "d1", "s13", "t1", "t3", "kappa"),
    )
    kw.update(overrides)
    return ModelDescriptor(**kw)


def make_linear_debug(gain: float = 0.9, dt_control: float = 0.02) -> ModelDescriptor:
    """Scalar system ``x+ = theta x + u`` in the single joint slot."""
    return ModelDescriptor(
        name="linear_1d",
        kind=K.KIND_LINEAR_1D,
        n_joints=1,
        joint_names=("x",),
        joint_groups=(0,),
        group_names=("x",),
        dt_physics=dt_control,
        dt_control=dt_control,
        kp=(0.0,),
        kd=(0.0,),
        motor_model=MotorModelKind.IDEAL,
        joint_lower=(-np.inf,),
        joint_upper=(np.inf,),
        geometry={"gain": gain},
    )


MODELS = {
    "planar_quadruped": make_planar_quadruped,
    "double_pendulum": make_double_pendulum,
    "linear_1d": make_linear_debug,
}


def make_model(name: str, **kwargs) -> ModelDescriptor:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**kwargs)


def standing_state(model: ModelDescriptor, height=None, x: float = 0.0) -> SimState:
    """Initial state with feet just touching the ground (quadruped) or
    hanging at rest (pendulum)."""
    n = model.n_joints
    if model.kind == K.KIND_PLANAR_QUADRUPED:
        q = np.asarray(model.geometry["stand_q"], dtype=float)
        l1, l2 = model.geometry["thigh_length"], model.geometry["calf_length"]
        foot_z = -l1 * np.cos(q[0]) - l2 * np.cos(q[0] + q[1])
        z = -foot_z if height is None else height
        return SimState([x, 0.0, z], pitch_quat(0.0), np.zeros(3), np.zeros(3), q, np.zeros(n))
    return SimState(np.zeros(3), [1.0, 0.0, 0.0, 0.0], np.zeros(3), np.zeros(3), np.zeros(n), np.zeros(n))
