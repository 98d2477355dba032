"""Forward-Euler Motsch-Tadmor map, an RK4 reference for the ODE, and limits.

Discrete model, with phi recomputed from the current positions every step:

    x_i(n+1) = x_i(n) + h v_i(n)
    v_i(n+1) = v_i(n) + h kappa sum_j phi_ij(n) (v_j(n) - v_i(n))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from mtflock.errors import ConvergenceError, DivergenceError, DomainError
from mtflock.kernel import Kernel, pairwise_distances
from mtflock.state import Ensemble, ObservableRecord, delta_frobenius, diameter, lambda_alpha

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class SimParams:
    kappa: float
    h: float
    steps: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 < self.h < min(1.0, 1.0 / self.kappa):
            raise DomainError(
                f"step size must satisfy 0 < h < min(1, 1/kappa); got h={self.h}, kappa={self.kappa}"
            )
        if int(self.steps) != self.steps or self.steps < 0:
            raise DomainError(f"steps must be a non-negative integer, got {self.steps}")


@dataclass
class Trajectory:
    """States at n = 0..steps plus the per-step observables."""

    params: SimParams
    kernel: Kernel
    positions: FloatArray  # (steps + 1, N, d)
    velocities: FloatArray  # (steps + 1, N, d)
    observables: list[ObservableRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    @property
    def ensembles(self) -> list[Ensemble]:
        return [Ensemble(x, v) for x, v in zip(self.positions, self.velocities)]

    def ensemble(self, step: int) -> Ensemble:
        return Ensemble(self.positions[step], self.velocities[step])

    def series(self, name: str) -> FloatArray:
        return np.array([getattr(rec, name) for rec in self.observables], dtype=np.float64)


def _weights_and_distances(kernel: Kernel, x: FloatArray) -> tuple[FloatArray, FloatArray]:
    dist = pairwise_distances(x)
    raw = kernel.eval(dist)
    raw = np.atleast_2d(raw)
    return raw / raw.sum(axis=1, keepdims=True), dist


def _alignment(w: FloatArray, v: FloatArray) -> FloatArray:
    """sum_j w_ij (v_j - v_i); exactly zero when all velocities agree."""
    return np.einsum("ij,ijk->ik", w, v[None, :, :] - v[:, None, :])


def _record(step: int, x: FloatArray, v: FloatArray, w: FloatArray, dist: FloatArray) -> ObservableRecord:
    lam, alpha = lambda_alpha(w)
    return ObservableRecord(
        step=step,
        dx_frob=delta_frobenius(x),
        dv_frob=delta_frobenius(v),
        diam_x=float(dist.max()),
        diam_v=diameter(v),
        lambda_min=lam,
        alpha_max=alpha,
    )


def euler_step(ens: Ensemble, kernel: Kernel, kappa: float, h: float) -> Ensemble:
    if h < 0.0 or kappa < 0.0:
        raise DomainError("h and kappa must be non-negative")
    x, v = ens.positions, ens.velocities
    w, _ = _weights_and_distances(kernel, x)
    x_next = x + h * v
    v_next = v + (h * kappa) * _alignment(w, v)
    if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(v_next))):
        raise DivergenceError(1)
    return Ensemble(x_next, v_next)


def simulate(ens0: Ensemble, kernel: Kernel, params: SimParams) -> Trajectory:
    """Iterate the discrete map for params.steps steps, recording observables."""
    steps = int(params.steps)
    xs = np.empty((steps + 1,) + ens0.positions.shape)
    vs = np.empty_like(xs)
    xs[0], vs[0] = ens0.positions, ens0.velocities
    hk = params.h * params.kappa
    records = []
    for n in range(steps + 1):
        x, v = xs[n], vs[n]
        w, dist = _weights_and_distances(kernel, x)
        records.append(_record(n, x, v, w, dist))
        if n == steps:
            break
        xs[n + 1] = x + params.h * v
        vs[n + 1] = v + hk * _alignment(w, v)
        if not (np.all(np.isfinite(xs[n + 1])) and np.all(np.isfinite(vs[n + 1]))):
            raise DivergenceError(n + 1)
    return Trajectory(params, kernel, xs, vs, records)


class _NonFinite(Exception):
    pass


def _rhs(kernel: Kernel, kappa: float, x: FloatArray, v: FloatArray) -> tuple[FloatArray, FloatArray]:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise _NonFinite
    w, _ = _weights_and_distances(kernel, x)
    return v, kappa * _alignment(w, v)


def default_reference_step(h_sample: float) -> float:
    return min(h_sample / 10.0, 1e-3)


def substep_ratio(h_sample: float, h_ref: float) -> int:
    if h_ref <= 0.0 or h_ref > h_sample * (1.0 + 1e-12):
        raise DomainError(f"need 0 < h_ref <= h_sample, got h_ref={h_ref}, h_sample={h_sample}")
    ratio = round(h_sample / h_ref)
    if ratio < 1 or abs(ratio * h_ref - h_sample) > 1e-9 * h_sample:
        raise DomainError(f"h_sample / h_ref = {h_sample / h_ref} is not a positive integer")
    return ratio


def reference_trajectory(
    ens0: Ensemble,
    kernel: Kernel,
    kappa: float,
    h_sample: float,
    steps: int,
    h_ref: float | None = None,
    observables: bool = True,
) -> Trajectory:
    """Classical RK4 solve of the continuous model, sampled at t = n h_sample.

    With observables=False the per-step records are skipped, which saves an
    N^2 pass per sample on long shared references.
    """
    if h_ref is None:
        h_ref = default_reference_step(h_sample)
    ratio = substep_ratio(h_sample, h_ref)
    dt = h_sample / ratio
    params = SimParams(kappa=kappa, h=h_sample, steps=steps)
    xs = np.empty((steps + 1,) + ens0.positions.shape)
    vs = np.empty_like(xs)
    x = np.array(ens0.positions, dtype=np.float64)
    v = np.array(ens0.velocities, dtype=np.float64)
    xs[0], vs[0] = x, v
    for n in range(1, steps + 1):
        try:
            for _ in range(ratio):
                k1x, k1v = _rhs(kernel, kappa, x, v)
                k2x, k2v = _rhs(kernel, kappa, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
                k3x, k3v = _rhs(kernel, kappa, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
                k4x, k4v = _rhs(kernel, kappa, x + dt * k3x, v + dt * k3v)
                x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        except _NonFinite:
            raise DivergenceError(n) from None
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DivergenceError(n)
        xs[n], vs[n] = x, v
    records = []
    if observables:
        for n in range(steps + 1):
            w, dist = _weights_and_distances(kernel, xs[n])
            records.append(_record(n, xs[n], vs[n], w, dist))
    return Trajectory(params, kernel, xs, vs, records)


def asymptotic_velocity(traj: Trajectory) -> FloatArray:
    """Final-step velocities as the estimate of the common limit velocity.

    Raises ConvergenceError unless the velocity discrepancy has contracted
    by a factor 1e-10 over the run.
    """
    dv0 = traj.observables[0].dv_frob
    dv_final = traj.observables[-1].dv_frob
    if dv0 > 0.0 and not dv_final < 1e-10 * dv0:
        raise ConvergenceError(dv_final, dv0)
    return np.array(traj.velocities[-1])
