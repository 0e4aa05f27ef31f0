"""Spectral-Galerkin solver for parabolic equations with state-dependent delay."""

from .delays import (
    DelayFunctional,
    check_H,
    constant_delay,
    eval_delay,
    integral_delay,
    multi_point_delay,
    p_of_integral_delay,
    point_delay,
)
from .errors import ConvergenceError, DivergenceError, InvalidArgument, OutOfWindowError, Unsupported
from .history import HistorySegment, InitialFunction, eval_at, extend, push, segment_sup_norm
from .integrator import ProblemSpec, SolverOptions, Trajectory, solve, solve_picard
from .nonlinearity import BirthFunction, Kernel, eval_b, eval_F, f_norm_bound
from .spectral import (
    SpectralOperator,
    apply_semigroup,
    build_dirichlet_laplacian_1d,
    frac_power_norm,
    to_modal,
    to_nodal,
)

__version__ = "0.1.0"

__all__ = [
    "DelayFunctional",
    "check_H",
    "constant_delay",
    "eval_delay",
    "integral_delay",
    "multi_point_delay",
    "p_of_integral_delay",
    "point_delay",
    "ConvergenceError",
    "DivergenceError",
    "InvalidArgument",
    "OutOfWindowError",
    "Unsupported",
    "HistorySegment",
    "InitialFunction",
    "eval_at",
    "extend",
    "push",
    "segment_sup_norm",
    "ProblemSpec",
    "SolverOptions",
    "Trajectory",
    "solve",
    "solve_picard",
    "BirthFunction",
    "Kernel",
    "eval_b",
    "eval_F",
    "f_norm_bound",
    "SpectralOperator",
    "apply_semigroup",
    "build_dirichlet_laplacian_1d",
    "frac_power_norm",
    "to_modal",
    "to_nodal",
]
