"""Discrete-to-continuous transition experiment.

For each step size h the Euler trajectory is compared against one shared RK4
reference sampled on the same grid. Velocity errors use the Frobenius norm of
the N x d difference matrix; position errors use the shape discrepancy of the
difference, i.e. ||Delta^{x,h}(n) - Delta^x(nh)||_F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mtflock.certify.flocking import admissible, frobenius_series
from mtflock.dynamics import SimParams, _rhs, reference_trajectory, simulate, substep_ratio
from mtflock.errors import DivergenceError, DomainError
from mtflock.kernel import Kernel
from mtflock.state import Ensemble, diameter


@dataclass
class TransitionReport:
    h_values: list[float]
    errors: list[float]
    dx_gap: list[float]
    n_horizon: list[int]
    slope: float
    h_ref: float
    # finite-time diagnostics: truncation error E1, global error E2 and its
    # exponential bound, the vector-field Lipschitz constant and radius R*
    e1_max: list[float] = field(default_factory=list)
    e2_max: list[float] = field(default_factory=list)
    e2_bound: list[float] = field(default_factory=list)
    lipschitz_f: float = math.nan
    r_star: float = math.nan
    dx_gap_bound: float = math.nan


def fit_order(h_values, errors) -> float:
    """Least-squares slope of log(error) against log(h).

    Degenerate inputs (a vanishing error, or fewer than two distinct h) have
    no defined order and report 0.0 so the slope stays finite.
    """
    err = np.asarray(errors, dtype=np.float64)
    if np.any(err <= 0.0) or len(set(h_values)) < 2:
        return 0.0
    return float(np.polyfit(np.log(np.asarray(h_values, dtype=np.float64)), np.log(err), 1)[0])


def vector_field_lipschitz(kernel: Kernel, kappa: float) -> float:
    return math.sqrt(1.0 + kappa**2 + (kernel.c2 / kernel.c1) ** 2)


def admissible_radius(kernel: Kernel, kappa: float, y0_norm: float) -> float:
    la = kernel.lipschitz_constant()
    if la == 0.0:
        return math.inf
    lf = vector_field_lipschitz(kernel, kappa)
    return lf / (2.0 * kappa * kernel.spread * la / kernel.c1) - y0_norm


def uniform_gap_bound(ens0: Ensemble, kernel: Kernel, kappa: float, c: float = 0.9) -> float:
    """2 N D(V(0)) / c~ with c~ = min(C kappa psi(M), kappa c1).

    a(D^inf) is replaced by its lower bound c1.
    """
    c_tilde = min(c * kappa * kernel.psi_at_radius(), kappa * kernel.c1)
    return 2.0 * ens0.n * diameter(ens0.velocities) / c_tilde


def transition_experiment(
    ens0: Ensemble,
    kernel: Kernel,
    kappa: float,
    horizon: float,
    h_list,
    h_ref: float | None = None,
) -> TransitionReport:
    h_values = [float(h) for h in h_list]
    if not h_values:
        raise DomainError("h_list is empty")
    for h in h_values:
        SimParams(kappa=kappa, h=h, steps=0)
    if h_ref is None:
        h_ref = min(min(h_values) / 10.0, 1e-3)
    ratios = [substep_ratio(h, h_ref) for h in h_values]
    horizons = [int(math.floor(horizon / h + 1e-9)) for h in h_values]
    ref_steps = max(r * n for r, n in zip(ratios, horizons))
    try:
        ref = reference_trajectory(ens0, kernel, kappa, h_ref, ref_steps, h_ref=h_ref, observables=False)
    except DivergenceError as exc:
        raise DivergenceError(exc.step, f"reference run with h_ref={h_ref} diverged at step {exc.step}") from exc

    lf = vector_field_lipschitz(kernel, kappa)
    y0_norm = math.sqrt(float(np.sum(ens0.positions**2) + np.sum(ens0.velocities**2)))
    report = TransitionReport(
        h_values=h_values,
        errors=[],
        dx_gap=[],
        n_horizon=horizons,
        slope=math.nan,
        h_ref=h_ref,
        lipschitz_f=lf,
        r_star=admissible_radius(kernel, kappa, y0_norm),
    )
    if admissible(ens0, kernel, kappa).admissible:
        report.dx_gap_bound = uniform_gap_bound(ens0, kernel, kappa)

    for h, ratio, n_h in zip(h_values, ratios, horizons):
        try:
            disc = simulate(ens0, kernel, SimParams(kappa=kappa, h=h, steps=n_h))
        except DivergenceError as exc:
            raise DivergenceError(exc.step, f"discrete run with h={h} diverged at step {exc.step}") from exc
        ref_x = ref.positions[:: ratio][: n_h + 1]
        ref_v = ref.velocities[:: ratio][: n_h + 1]
        v_err = np.sqrt(np.einsum("snk,snk->s", disc.velocities - ref_v, disc.velocities - ref_v))
        x_gap = frobenius_series(disc.positions - ref_x)
        report.errors.append(float(v_err.max()))
        report.dx_gap.append(float(x_gap.max()))

        state_err = np.sqrt(
            np.einsum("snk,snk->s", disc.positions - ref_x, disc.positions - ref_x) + v_err**2
        )
        e1 = 0.0
        for n in range(n_h):
            fx, fv = _rhs(kernel, kappa, ref_x[n], ref_v[n])
            rx = fx - (ref_x[n + 1] - ref_x[n]) / h
            rv = fv - (ref_v[n + 1] - ref_v[n]) / h
            e1 = max(e1, math.sqrt(float(np.sum(rx * rx) + np.sum(rv * rv))))
        report.e1_max.append(e1)
        report.e2_max.append(float(state_err.max()))
        report.e2_bound.append(e1 / lf * math.expm1(lf * n_h * h))

    report.slope = fit_order(h_values, report.errors)
    return report
