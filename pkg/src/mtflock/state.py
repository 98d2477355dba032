"""Ensemble container and the scalar observables tracked along trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mtflock.errors import DomainError
from mtflock.kernel import Kernel, pairwise_distances, weights

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class Ensemble:
    positions: FloatArray
    velocities: FloatArray

    def __post_init__(self) -> None:
        x = np.array(self.positions, dtype=np.float64)
        v = np.array(self.velocities, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DomainError("positions must be N x d with N, d >= 1")
        if v.shape != x.shape:
            raise DomainError(f"velocity shape {v.shape} != position shape {x.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DomainError("ensemble contains non-finite coordinates")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class ObservableRecord:
    step: int
    dx_frob: float
    dv_frob: float
    diam_x: float
    diam_v: float
    lambda_min: float
    alpha_max: float


def delta_frobenius(vectors: ArrayLike) -> float:
    """sqrt(sum_{i,j} |z_i - z_j|^2) over all ordered pairs.

    Each unordered pair is counted twice. Uses the identity
    sum_{i,j} |z_i - z_j|^2 = 2N sum_i |z_i - mean|^2, after shifting by the
    first row so that identical rows give exactly 0.
    """
    z = np.asarray(vectors, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    y = z - z[0]
    centered = y - y.mean(axis=0)
    return float(np.sqrt(2.0 * z.shape[0] * np.sum(centered * centered)))


def diameter(vectors: ArrayLike) -> float:
    z = np.asarray(vectors, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] < 2:
        return 0.0
    return float(pairwise_distances(z).max())


def lambda_alpha(w: ArrayLike) -> tuple[float, float]:
    """Stability quantities of a weight matrix.

    lambda = min over all (i, j) of w_ij + w_ji.
    alpha = max over i != j of (1 - w_ij - w_ii)^2; the diagonal terms never
    multiply a nonzero difference, so they are left out (alpha = 0 for N = 1).
    """
    w = np.asarray(w, dtype=np.float64)
    lam = float((w + w.T).min())
    n = w.shape[0]
    if n < 2:
        return lam, 0.0
    comp = (1.0 - w - np.diag(w)[:, None]) ** 2
    off = ~np.eye(n, dtype=bool)
    return lam, float(comp[off].max())


def observe(positions: FloatArray, velocities: FloatArray, w: FloatArray, step: int) -> ObservableRecord:
    """Record for one time index, given the weight matrix already computed there."""
    lam, alpha = lambda_alpha(w)
    return ObservableRecord(
        step=step,
        dx_frob=delta_frobenius(positions),
        dv_frob=delta_frobenius(velocities),
        diam_x=diameter(positions),
        diam_v=diameter(velocities),
        lambda_min=lam,
        alpha_max=alpha,
    )


def observe_ensemble(ens: Ensemble, kernel: Kernel, step: int = 0) -> ObservableRecord:
    return observe(ens.positions, ens.velocities, weights(kernel, ens.positions), step)
