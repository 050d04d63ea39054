"""Discrete Lagrangian mechanics on Lie groupoids."""

from .groupoid import (
    CompositionError,
    DiscreteLagrangian,
    Groupoid,
    Momentum,
    del_residual,
    left_derivative,
    legendre_minus,
    legendre_plus,
    omega_L,
    regularity_matrix,
    right_derivative,
)
from .solver import (
    MaxItersExceeded,
    NewtonConfig,
    SingularJacobian,
    SolverError,
    StepReport,
    Trajectory,
    evolve_step,
    invert_legendre_minus,
    run_trajectory,
)

__all__ = [
    "CompositionError", "DiscreteLagrangian", "Groupoid", "Momentum", "del_residual",
    "left_derivative", "legendre_minus", "legendre_plus", "omega_L", "regularity_matrix",
    "right_derivative", "MaxItersExceeded", "NewtonConfig", "SingularJacobian", "SolverError",
    "StepReport", "Trajectory", "evolve_step", "invert_legendre_minus", "run_trajectory",
]

__version__ = "0.1.0"
