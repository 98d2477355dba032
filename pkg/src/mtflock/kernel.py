"""Communication weight a(r) = c1 + (c2 - c1)(1 + r^2)^(-beta) and its constants.

Everything downstream (flocking radius, decay factor, stability coefficients)
is a closed form in the three kernel parameters, so the kernel family is fixed
rather than pluggable: the Lipschitz constant is exact, never estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mtflock.errors import DomainError

FloatArray = NDArray[np.float64]

INFINITE_RADIUS = math.inf


@dataclass(frozen=True)
class Kernel:
    """Bounded, non-increasing weight a(r) with c1 <= a(r) <= c2."""

    c1: float
    c2: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not 0.0 < self.c1 <= self.c2:
            raise DomainError(f"need 0 < c1 <= c2, got c1={self.c1}, c2={self.c2}")
        if self.beta < 0.0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")

    @property
    def is_constant(self) -> bool:
        return self.beta == 0.0 or self.c1 == self.c2

    @property
    def spread(self) -> float:
        """1 + c2/c1, the factor that recurs in every normalized-weight bound."""
        return 1.0 + self.c2 / self.c1

    def eval(self, r: ArrayLike) -> FloatArray | float:
        r_arr = np.asarray(r, dtype=np.float64)
        if np.any(r_arr < 0.0) or np.any(np.isnan(r_arr)):
            raise DomainError("distance must be non-negative")
        out = self.c1 + (self.c2 - self.c1) * (1.0 + r_arr * r_arr) ** (-self.beta)
        return float(out) if out.ndim == 0 else out

    def derivative(self, r: ArrayLike) -> FloatArray | float:
        r_arr = np.asarray(r, dtype=np.float64)
        out = -2.0 * r_arr * self.beta * (self.c2 - self.c1) * (1.0 + r_arr * r_arr) ** (-self.beta - 1.0)
        return float(out) if out.ndim == 0 else out

    def lipschitz_constant(self) -> float:
        """sup |a'(r)|, attained at r* = 1/sqrt(2 beta + 1)."""
        if self.is_constant:
            return 0.0
        b = self.beta
        return (
            2.0 * b * (self.c2 - self.c1) / math.sqrt(2.0 * b + 1.0)
            * (1.0 + 1.0 / (2.0 * b + 1.0)) ** (-b - 1.0)
        )

    def scaled_phi_lip(self) -> float:
        """N * ||phi||_Lip, which does not depend on N."""
        return self.lipschitz_constant() * self.spread / self.c1

    def phi_lip(self, n: int) -> float:
        """Lipschitz bound on x -> phi_il for an ensemble of n particles."""
        if n < 1:
            raise DomainError(f"particle count must be >= 1, got {n}")
        return self.scaled_phi_lip() / n

    def flocking_radius(self) -> float:
        """M = 1 / (4 N ||phi||_Lip); INFINITE_RADIUS for a constant kernel."""
        if self.is_constant:
            return INFINITE_RADIUS
        b = self.beta
        return (
            self.c1 * math.sqrt(2.0 * b + 1.0)
            / (8.0 * b * (self.c2 - self.c1) * self.spread)
            * (1.0 + 1.0 / (2.0 * b + 1.0)) ** (b + 1.0)
        )

    def psi(self, s: float) -> float:
        """Decay factor 1 - N ||phi||_Lip s (identically 1 for constant kernels)."""
        if s < 0.0:
            raise DomainError("psi is defined for s >= 0")
        if self.is_constant:
            return 1.0
        return 1.0 - self.scaled_phi_lip() * s

    def psi_at_radius(self) -> float:
        m = self.flocking_radius()
        return 1.0 if math.isinf(m) else self.psi(m)

    def lipschitz_radius_product(self) -> float:
        """L_a M (1 + c2/c1) / c1.

        Equals 1/4 identically whenever L_a > 0. For constant kernels the
        product is taken as 0: the terms it multiplies come from
        ||phi||_Lip * ||Delta^x|| factors that vanish when a is flat.
        """
        if self.is_constant:
            return 0.0
        return self.lipschitz_constant() * self.flocking_radius() * self.spread / self.c1

    def psi_integral(self, lower: float, upper: float) -> float:
        """Exact integral of psi over [lower, upper]."""
        if self.is_constant:
            return upper - lower
        k = self.scaled_phi_lip()
        return (upper - lower) - 0.5 * k * (upper * upper - lower * lower)


def pairwise_distances(points: ArrayLike) -> FloatArray:
    """N x N matrix of Euclidean distances between rows."""
    p = np.asarray(points, dtype=np.float64)
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def weights(kernel: Kernel, positions: ArrayLike) -> FloatArray:
    """Row-stochastic matrix phi_ij = a(|x_i - x_j|) / sum_k a(|x_i - x_k|).

    Row i holds the weights particle i receives. The self-weight a(0) = c2
    stays in the normalization.
    """
    x = np.asarray(positions, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DomainError("positions must be an N x d array with N >= 1")
    if not np.all(np.isfinite(x)):
        raise DomainError("positions contain non-finite coordinates")
    raw = kernel.eval(pairwise_distances(x))
    raw = np.atleast_2d(raw)
    w = raw / raw.sum(axis=1, keepdims=True)
    w.setflags(write=False)
    return w
