"""Travelling profiles of degenerate advection-reaction-diffusion equations."""

from .classify import Classification, classify, classify_at_top, classify_monotonicity
from .convergence import ConvergenceReport, build_family, compare_z, run_convergence
from .errors import EvaluationError, NumericalError, PreconditionError
from .evolve import Field1D, evolve, measure_speed, rkl2_step, step
from .model import (
    Model,
    ScalarField,
    builtin_model,
    load_model,
    model_from_dict,
    validate_assumptions,
)
from .pasting import PasteResult, build_pieces, paste, reflect_model
from .profile import ProfileSolution, reconstruct, semi_wavefront, xi_of_phi
from .zsolver import SolverOptions, ZSolution, critical_speed, solve_z, zdot_at_endpoint

__all__ = [
    "Classification", "ConvergenceReport", "EvaluationError", "Field1D", "Model", "NumericalError",
    "PasteResult", "PreconditionError", "ProfileSolution", "ScalarField", "SolverOptions", "ZSolution",
    "build_family", "build_pieces", "builtin_model", "classify", "classify_at_top", "classify_monotonicity",
    "compare_z", "critical_speed", "evolve", "load_model", "measure_speed", "model_from_dict", "paste",
    "reconstruct", "reflect_model", "rkl2_step", "run_convergence", "semi_wavefront", "solve_z", "step",
    "validate_assumptions", "xi_of_phi", "zdot_at_endpoint",
]
