"""Verification harness for the flocking, transition and stability estimates."""

from mtflock.certify.flocking import (
    EnvelopeCheck,
    FlockingCertificate,
    KernelLemmaMargins,
    RecursionCheck,
    TailCheck,
    admissible,
    check_flocking_envelope,
    check_kernel_lemmas,
    check_recursions,
    check_velocity_tail,
    frobenius_series,
    triple_delta_sum,
    velocity_envelope,
)
from mtflock.certify.stability import (
    DecayConstants,
    StabilityReport,
    check_stability,
    decay_constants,
    stability_coefficients,
)
from mtflock.certify.transition import TransitionReport, fit_order, transition_experiment

__all__ = [
    "DecayConstants",
    "EnvelopeCheck",
    "FlockingCertificate",
    "KernelLemmaMargins",
    "RecursionCheck",
    "StabilityReport",
    "TailCheck",
    "TransitionReport",
    "admissible",
    "check_flocking_envelope",
    "check_kernel_lemmas",
    "check_recursions",
    "check_stability",
    "check_velocity_tail",
    "decay_constants",
    "fit_order",
    "frobenius_series",
    "stability_coefficients",
    "transition_experiment",
    "triple_delta_sum",
    "velocity_envelope",
]
