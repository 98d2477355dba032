"""Uniform-in-time stability between two discrete trajectories.

Notation along a pair (A, B) of runs with the same kernel, kappa and h:

    X_n = ||Delta^v_A(n) - Delta^v_B(n)||_F    (velocity shape gap)
    Y_n = ||Delta^x_A(n) - Delta^x_B(n)||_F    (position shape gap)

lambda and alpha are read off the weight matrix of run B at step n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from mtflock.certify.flocking import admissible, frobenius_series
from mtflock.dynamics import Trajectory, _weights_and_distances
from mtflock.errors import DomainError, PreconditionError
from mtflock.kernel import Kernel
from mtflock.state import lambda_alpha

FloatArray = NDArray[np.float64]
BoolArray = NDArray[np.bool_]

STABILITY_TOL = 1e-9
# keys double as the stability.csv column stems
FAMILIES = ("prop42", "lem46", "thm41")


def stability_coefficients(
    lam: float, alpha: float, kernel: Kernel, n_count: int, kappa: float, h: float
) -> tuple[float, float, float]:
    """(C1, C2, C3) of the one-step squared velocity-gap bound."""
    if n_count < 1:
        raise DomainError(f"particle count must be >= 1, got {n_count}")
    q = kernel.lipschitz_radius_product()
    hk = h * kappa
    damp = 1.0 - hk * lam
    c1 = (
        damp**2
        + 4.0 * hk**2 * (alpha + q * q / n_count)
        + 2.0 * math.sqrt(2.0) * hk * damp * math.sqrt(alpha + q * q)
    )
    c2 = 8.0 * hk * q * damp
    c3 = 32.0 * hk**2 * q * q
    return c1, c2, c3


@dataclass(frozen=True)
class DecayConstants:
    """b1, b2 and the derived amplitude B / D of the iterated gap bound."""

    c0bar: float
    c1bar: float
    c2bar: float
    b1: float
    b2: float
    amplitude: float  # b1 e^{b2} / (1 - (1 - eps) e^{b2})

    def envelope(self, n: FloatArray | int) -> FloatArray | float:
        return np.exp(-self.b2 * np.asarray(n, dtype=np.float64))

    def c_nh(self, n: FloatArray | int, h: float) -> FloatArray | float:
        """C(n, h) = h A (1 - e^{-b2 n}) / (1 - e^{-b2}) + A e^{-b2 n}."""
        n = np.asarray(n, dtype=np.float64)
        geo = -np.expm1(-self.b2 * n) / -math.expm1(-self.b2)
        return h * self.amplitude * geo + self.amplitude * np.exp(-self.b2 * n)


def decay_constants(
    kernel: Kernel, kappa: float, h: float, epsilon: float, dv_a0: float, dv_b0: float
) -> DecayConstants:
    """Constants of the gap recursion X_{n+1} <= (1 - eps) X_n + b1 e^{-b2 n}.

    b2 = -ln(1 - h kappa psi(M)), so e^{-b2 n} is exactly the geometric
    flocking envelope ratio raised to n.
    """
    q = kernel.lipschitz_radius_product()
    s = dv_a0**2 + dv_b0**2
    c0bar = 4.0 * s
    c1bar = 16.0 * kappa * (1.0 + q) * s + 4.0 * kappa * q * dv_a0**2
    c2bar = 32.0 * kappa**2 * q * q * dv_a0**2
    b1 = math.sqrt(c0bar * epsilon + c1bar * h + c2bar * h * h)
    ratio = 1.0 - h * kappa * kernel.psi_at_radius()
    if not 0.0 < ratio < 1.0:
        raise PreconditionError(f"1 - h kappa psi(M) = {ratio} is outside (0, 1)")
    b2 = -math.log(ratio)
    denom = 1.0 - (1.0 - epsilon) * math.exp(b2)
    if denom <= 0.0:
        raise PreconditionError(
            f"1 - (1 - eps) e^b2 = {denom} <= 0; increase epsilon or decrease h"
        )
    return DecayConstants(c0bar, c1bar, c2bar, b1, b2, b1 * math.exp(b2) / denom)


@dataclass
class StabilityReport:
    epsilon: float
    x_gap: FloatArray  # X_n
    y_gap: FloatArray  # Y_n
    lam: FloatArray
    alpha: FloatArray
    c1: FloatArray
    c2: FloatArray
    c3: FloatArray
    b1: float
    b2: float
    c_nh: FloatArray
    # flags[name][n] judges the bound that ends at step n; the one-step
    # families are vacuously true at n = 0
    flags: dict[str, BoolArray] = field(default_factory=dict)
    slack: dict[str, FloatArray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(self.flags[name].all()) for name in FAMILIES)

    def first_violation(self, name: str) -> int | None:
        bad = ~self.flags[name]
        return int(np.argmax(bad)) if bad.any() else None


def _holds(lhs: FloatArray, rhs: FloatArray) -> BoolArray:
    return lhs <= rhs + STABILITY_TOL * np.abs(rhs)


def _lambda_alpha_series(traj: Trajectory) -> tuple[FloatArray, FloatArray]:
    if len(traj.observables) == traj.steps + 1:
        return traj.series("lambda_min"), traj.series("alpha_max")
    pairs = [lambda_alpha(_weights_and_distances(traj.kernel, x)[0]) for x in traj.positions]
    arr = np.array(pairs, dtype=np.float64)
    return arr[:, 0], arr[:, 1]


def check_stability(traj_a: Trajectory, traj_b: Trajectory, epsilon: float = 0.5) -> StabilityReport:
    pa, pb = traj_a.params, traj_b.params
    if (pa.kappa, pa.h) != (pb.kappa, pb.h) or traj_a.kernel != traj_b.kernel:
        raise DomainError("trajectories differ in kernel, kappa or h")
    if traj_a.positions.shape != traj_b.positions.shape:
        raise DomainError(
            f"trajectory shapes differ: {traj_a.positions.shape} vs {traj_b.positions.shape}"
        )
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    kernel, kappa, h = traj_a.kernel, pa.kappa, pa.h
    if not h < epsilon:
        raise PreconditionError(f"need h < epsilon, got h={h}, epsilon={epsilon}")
    cert_a = admissible(traj_a.ensemble(0), kernel, kappa)
    cert_b = admissible(traj_b.ensemble(0), kernel, kappa)
    if not (cert_a.admissible and cert_b.admissible):
        raise PreconditionError("both initial ensembles must be admissible")

    x_gap = frobenius_series(traj_a.velocities - traj_b.velocities)
    y_gap = frobenius_series(traj_a.positions - traj_b.positions)
    dv_a = frobenius_series(traj_a.velocities)
    lam, alpha = _lambda_alpha_series(traj_b)
    coeffs = np.array(
        [stability_coefficients(l, a, kernel, traj_a.n, kappa, h) for l, a in zip(lam, alpha)]
    )
    c1, c2, c3 = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2]
    consts = decay_constants(kernel, kappa, h, epsilon, cert_a.dv0, cert_b.dv0)
    steps = np.arange(traj_a.steps + 1, dtype=np.float64)
    c_nh = np.asarray(consts.c_nh(steps, h))
    env = np.asarray(consts.envelope(steps))

    report = StabilityReport(
        epsilon=epsilon,
        x_gap=x_gap,
        y_gap=y_gap,
        lam=lam,
        alpha=alpha,
        c1=c1,
        c2=c2,
        c3=c3,
        b1=consts.b1,
        b2=consts.b2,
        c_nh=c_nh,
    )

    prev = slice(None, -1)
    rhs42 = c1[prev] * x_gap[prev] ** 2 + c2[prev] * x_gap[prev] * dv_a[prev] + c3[prev] * dv_a[prev] ** 2
    lhs42 = x_gap[1:] ** 2
    rhs46 = (1.0 - epsilon) * x_gap[prev] + consts.b1 * env[prev]
    lhs46 = x_gap[1:]
    rhs41 = x_gap[0] + y_gap[0] + c_nh
    lhs41 = x_gap + y_gap
    rhs_it = (1.0 - epsilon) ** steps * x_gap[0] + consts.amplitude * env

    true0 = np.ones(1, dtype=bool)
    report.flags = {
        "prop42": np.concatenate([true0, _holds(lhs42, rhs42)]),
        "lem46": np.concatenate([true0, _holds(lhs46, rhs46)]),
        "thm41": _holds(lhs41, rhs41),
        "iterated": _holds(x_gap, rhs_it),
    }
    report.slack = {
        "prop42": np.concatenate([[0.0], rhs42 - lhs42]),
        "lem46": np.concatenate([[0.0], rhs46 - lhs46]),
        "thm41": rhs41 - lhs41,
        "iterated": rhs_it - x_gap,
    }
    return report
