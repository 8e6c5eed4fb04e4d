"""Parameterised forward dynamics ``x_{t+1} = f(x_t, u_t; theta)``."""
from .models import (
    ContactParams,
    ModelDescriptor,
    make_double_pendulum,
    make_linear_debug,
    make_model,
    make_planar_quadruped,
    standing_state,
)
from .params import ParamSpace, ParamVector, rigid_bounds
from .sim import Rollout, StepResult, rollout, rollout_arrays, step, step_detailed
from .state import ControlInput, SimState, pitch_quat, tangent_difference

__all__ = [
    "ContactParams",
    "ControlInput",
    "ModelDescriptor",
    "ParamSpace",
    "ParamVector",
    "Rollout",
    "SimState",
    "StepResult",
    "make_double_pendulum",
    "make_linear_debug",
    "make_model",
    "make_planar_quadruped",
    "pitch_quat",
    "rigid_bounds",
    "rollout",
    "rollout_arrays",
    "standing_state",
    "step",
    "step_detailed",
    "tangent_difference",
]
