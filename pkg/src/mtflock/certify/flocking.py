"""Admissibility certificate and per-step checks of the flocking estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from mtflock.dynamics import Trajectory, asymptotic_velocity
from mtflock.errors import ConvergenceError, PreconditionError
from mtflock.kernel import Kernel, pairwise_distances, weights
from mtflock.state import Ensemble, delta_frobenius

FloatArray = NDArray[np.float64]

RECURSION_TOL = 1e-10
ENVELOPE_TOL = 1e-9
LEMMA_TOL = 1e-12


@dataclass(frozen=True)
class FlockingCertificate:
    m_bound: float
    psi_at_m: float
    dx0: float
    dv0: float
    budget: float
    admissible: bool
    margins: tuple[float, float]
    kappa: float
    n: int


def admissible(ens0: Ensemble, kernel: Kernel, kappa: float) -> FlockingCertificate:
    """Check dx0 < M and dv0 < kappa * int_{dx0}^{M} psi(s) ds, both strict."""
    m = kernel.flocking_radius()
    dx0 = delta_frobenius(ens0.positions)
    dv0 = delta_frobenius(ens0.velocities)
    if math.isinf(m):
        budget = math.inf
        ok = math.isfinite(dv0)
    else:
        budget = kappa * kernel.psi_integral(dx0, m)
        ok = dx0 < m and dv0 < budget
    return FlockingCertificate(
        m_bound=m,
        psi_at_m=kernel.psi_at_radius(),
        dx0=dx0,
        dv0=dv0,
        budget=budget,
        admissible=bool(ok),
        margins=(m - dx0, budget - dv0),
        kappa=kappa,
        n=ens0.n,
    )


def frobenius_series(stack: FloatArray) -> FloatArray:
    """delta_frobenius of every (N, d) slice of a (steps + 1, N, d) stack."""
    y = stack - stack[:, :1, :]
    centered = y - y.mean(axis=1, keepdims=True)
    return np.sqrt(2.0 * stack.shape[1] * np.einsum("snk,snk->s", centered, centered))


@dataclass(frozen=True)
class RecursionCheck:
    passed: bool
    first_violation: int | None
    position_slack: FloatArray  # rhs - lhs for the step n -> n + 1
    velocity_slack: FloatArray


def check_recursions(traj: Trajectory, kernel: Kernel | None = None) -> RecursionCheck:
    """One-step bounds on the position and velocity shape discrepancies.

    dx(n+1) <= dx(n) + h dv(n)
    dv(n+1) <= [1 - h kappa (1 - N ||phi||_Lip dx(n))] dv(n)
    """
    kernel = kernel or traj.kernel
    h, kappa = traj.params.h, traj.params.kappa
    dx = frobenius_series(traj.positions)
    dv = frobenius_series(traj.velocities)
    rhs_x = dx[:-1] + h * dv[:-1]
    rhs_v = (1.0 - h * kappa * (1.0 - kernel.scaled_phi_lip() * dx[:-1])) * dv[:-1]
    slack_x = rhs_x - dx[1:]
    slack_v = rhs_v - dv[1:]
    bad = (slack_x < -RECURSION_TOL * (1.0 + np.abs(rhs_x))) | (
        slack_v < -RECURSION_TOL * (1.0 + np.abs(rhs_v))
    )
    first = int(np.argmax(bad)) + 1 if bad.any() else None
    return RecursionCheck(first is None, first, slack_x, slack_v)


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    first_violation: int | None
    worst_velocity_margin: float  # min over n of bound - value, relative to the bound
    worst_position_margin: float


def velocity_envelope(cert: FlockingCertificate, h: float, steps: int) -> FloatArray:
    """dv0 * (1 - h kappa psi(M))^n for n = 0..steps."""
    ratio = 1.0 - h * cert.kappa * cert.psi_at_m
    return cert.dv0 * ratio ** np.arange(steps + 1, dtype=np.float64)


def check_flocking_envelope(traj: Trajectory, cert: FlockingCertificate) -> EnvelopeCheck:
    """dx(n) <= M and dv(n) <= dv0 (1 - h kappa psi(M))^n at every step."""
    if not cert.admissible:
        raise PreconditionError("flocking envelope requires an admissible certificate")
    dx = frobenius_series(traj.positions)
    dv = frobenius_series(traj.velocities)
    env = velocity_envelope(cert, traj.params.h, traj.steps)
    v_bad = dv > env * (1.0 + ENVELOPE_TOL)
    x_bad = dx > cert.m_bound * (1.0 + ENVELOPE_TOL)
    bad = v_bad | x_bad
    with np.errstate(divide="ignore", invalid="ignore"):
        v_margin = np.where(env > 0, (env - dv) / env, np.where(dv > 0, -np.inf, 0.0))
    x_margin = np.inf if math.isinf(cert.m_bound) else float(((cert.m_bound - dx) / cert.m_bound).min())
    first = int(np.argmax(bad)) if bad.any() else None
    return EnvelopeCheck(first is None, first, float(v_margin.min()), x_margin)


@dataclass(frozen=True)
class TailCheck:
    passed: bool
    first_violation: int | None
    worst_margin: float


def check_velocity_tail(traj: Trajectory, cert: FlockingCertificate) -> TailCheck:
    """|v_i^inf - v_i(n)| <= sqrt(N) dv0 (1 - h kappa psi(M))^n / psi(M)."""
    if not cert.admissible:
        raise PreconditionError("velocity tail bound requires an admissible certificate")
    try:
        v_inf = asymptotic_velocity(traj)
    except ConvergenceError as exc:
        raise PreconditionError(f"trajectory has not converged: {exc}") from exc
    gaps = np.linalg.norm(traj.velocities - v_inf[None, :, :], axis=2).max(axis=1)
    bound = math.sqrt(traj.n) * velocity_envelope(cert, traj.params.h, traj.steps) / cert.psi_at_m
    bad = gaps > bound * (1.0 + ENVELOPE_TOL) + 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(bound > 0, (bound - gaps) / bound, 0.0)
    first = int(np.argmax(bad)) if bad.any() else None
    return TailCheck(first is None, first, float(margin.min()))


@dataclass(frozen=True)
class KernelLemmaMargins:
    weight_lipschitz: float  # min_{i,j,l} ||phi||_Lip |x_i - x_j| - |phi_il - phi_jl|
    triple_sum: float  # N dx dv^2 - sum_{i,j,l} |dv_li| |dv_ij| |dx_ij|

    @property
    def passed(self) -> bool:
        return self.weight_lipschitz >= -LEMMA_TOL and self.triple_sum >= -LEMMA_TOL


def triple_delta_sum(positions: FloatArray, velocities: FloatArray) -> float:
    """sum_{i,j,l} |v_l - v_i| |v_i - v_j| |x_i - x_j|, summed over l first."""
    dist_x = pairwise_distances(positions)
    dist_v = pairwise_distances(velocities)
    col = dist_v.sum(axis=0)  # col[i] = sum_l |v_l - v_i|
    return float(np.sum(col[:, None] * dist_v * dist_x))


def check_kernel_lemmas(ens: Ensemble, kernel: Kernel) -> KernelLemmaMargins:
    w = weights(kernel, ens.positions)
    dist_x = pairwise_distances(ens.positions)
    lip = kernel.phi_lip(ens.n)
    gap = np.abs(w[:, None, :] - w[None, :, :])  # [i, j, l] = |phi_il - phi_jl|
    weight_lipschitz = float((lip * dist_x[:, :, None] - gap).min())
    rhs = ens.n * delta_frobenius(ens.positions) * delta_frobenius(ens.velocities) ** 2
    triple_sum = rhs - triple_delta_sum(ens.positions, ens.velocities)
    return KernelLemmaMargins(weight_lipschitz, triple_sum)
