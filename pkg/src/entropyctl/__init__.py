"""Entropy control of an open two-qubit system with coherent and incoherent controls."""
from .controls import ControlBounds, ControlSet, GAEncoding, RegularizationSpec
from .dynamics import Trajectory, solve_backward, solve_forward
from .errors import IntegrationError, InvalidStateError, NumericalConsistencyError
from .model import ModelParameters, build_operators
from .objectives import ObjectiveSpec
from .optim import GAConfig, GPMConfig, GPMProblem, ga_minimize, gpm1, gpm2

__version__ = "0.1.0"

__all__ = [
    "ControlBounds",
    "ControlSet",
    "GAEncoding",
    "RegularizationSpec",
    "Trajectory",
    "solve_forward",
    "solve_backward",
    "IntegrationError",
    "InvalidStateError",
    "NumericalConsistencyError",
    "ModelParameters",
    "build_operators",
    "ObjectiveSpec",
    "GAConfig",
    "GPMConfig",
    "GPMProblem",
    "ga_minimize",
    "gpm1",
    "gpm2",
]
