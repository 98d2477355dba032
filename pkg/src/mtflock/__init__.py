"""Forward-Euler Motsch-Tadmor flocking: simulation and inequality verification."""

from mtflock.dynamics import (
    SimParams,
    Trajectory,
    asymptotic_velocity,
    euler_step,
    reference_trajectory,
    simulate,
)
from mtflock.errors import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    PreconditionError,
)
from mtflock.kernel import INFINITE_RADIUS, Kernel, pairwise_distances, weights
from mtflock.state import Ensemble, ObservableRecord, delta_frobenius, diameter, lambda_alpha

__all__ = [
    "INFINITE_RADIUS",
    "ConfigError",
    "ConvergenceError",
    "DivergenceError",
    "DomainError",
    "Ensemble",
    "Kernel",
    "ObservableRecord",
    "PreconditionError",
    "SimParams",
    "Trajectory",
    "asymptotic_velocity",
    "delta_frobenius",
    "diameter",
    "euler_step",
    "lambda_alpha",
    "pairwise_distances",
    "reference_trajectory",
    "simulate",
    "weights",
]
