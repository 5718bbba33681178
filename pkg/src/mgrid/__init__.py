"""Islanded AC microgrid simulator with event-triggered distributed MPC
secondary voltage control and an intermittent deadbeat Volterra observer.

Hot numeric kernels are JIT-compiled with numba by default; set
``MGRID_BACKEND=numpy`` to force the pure-numpy fallback.
"""

__version__ = "0.1.0"

from .params import DGParams, DGInput, DG1_PARAMS, DG2_PARAMS, DG34_PARAMS
from .plant import PlantState, NetworkModel, frame_transform, droop_outputs
from .fl import compute_f, compute_g, auxiliary_to_actual
from .prediction import (
    PredictionModel,
    build_discrete_model,
    build_prediction_matrices,
    predict_outputs,
    shift_sequence,
    first_input,
)


def load_scenario(path):
    from .scenario import load_scenario as _load
    return _load(path)


def run(scenario, **kw):
    from .conductor import run as _run
    return _run(scenario, **kw)


def __getattr__(name):
    if name == "Scenario":
        from .scenario import Scenario
        return Scenario
    raise AttributeError(name)

__all__ = [
    "DGParams",
    "DGInput",
    "DG1_PARAMS",
    "DG2_PARAMS",
    "DG34_PARAMS",
    "PlantState",
    "NetworkModel",
    "frame_transform",
    "droop_outputs",
    "compute_f",
    "compute_g",
    "auxiliary_to_actual",
    "PredictionModel",
    "build_discrete_model",
    "build_prediction_matrices",
    "predict_outputs",
    "shift_sequence",
    "first_input",
    "Scenario",
    "load_scenario",
    "run",
]
