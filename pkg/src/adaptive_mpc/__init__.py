"""Adaptive MPC with set-membership identification over orthonormal-basis models."""

from .basis import BasisFamily, BasisKind, RegressorDynamics, build_dynamics, impulse_response, impulse_responses
from .config import ConstraintSet, ControllerConfig
from .controller import AdaptiveMPC, StepInfo
from .setid import EmptySetError, ModelSet, NominalModel
from .sim import Scenario, SignalKind, SignalSpec, simulate, summarize
from .solver import SolverSettings

__all__ = [
    "AdaptiveMPC",
    "BasisFamily",
    "BasisKind",
    "ConstraintSet",
    "ControllerConfig",
    "EmptySetError",
    "ModelSet",
    "NominalModel",
    "RegressorDynamics",
    "Scenario",
    "SignalKind",
    "SignalSpec",
    "SolverSettings",
    "StepInfo",
    "build_dynamics",
    "impulse_response",
    "impulse_responses",
    "simulate",
    "summarize",
]
