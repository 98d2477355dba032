"""Reindexing inequality for psi-weighted increment sums along a scalar path.

For a path s_0..s_K with s_K > s_0 and a decreasing psi, the forward sum

    sum_n (s_{n+1} - s_n) psi(s_n)

dominates the same sum taken over the sorted distinct values in [s_0, s_K].
The check is done in two stages: refining the path so no step jumps over
another value of the path, then splitting the refined steps into those
below s_0 (whose net contribution is non-negative) and those above.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from mtflock.errors import DomainError

FloatArray = NDArray[np.float64]
Psi = Callable[[float], float]

REINDEX_TOL = 1e-12


@dataclass(frozen=True)
class ScalarPath:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(s) for s in self.values)
        if len(vals) < 2:
            raise DomainError("a path needs at least two values")
        if not all(np.isfinite(vals)) or min(vals) < 0.0:
            raise DomainError("path values must be finite and non-negative")
        if not vals[-1] > vals[0]:
            raise DomainError(f"path must end above its start, got s_0={vals[0]}, s_K={vals[-1]}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def start(self) -> float:
        return self.values[0]

    @property
    def end(self) -> float:
        return self.values[-1]


def _as_path(path: ScalarPath | Sequence[float]) -> ScalarPath:
    return path if isinstance(path, ScalarPath) else ScalarPath(tuple(path))


def refine(path: ScalarPath | Sequence[float]) -> ScalarPath:
    """Insert, between each consecutive pair, every path value strictly between them."""
    p = _as_path(path)
    levels = np.unique(p.values)
    out = [p.values[0]]
    for a, b in zip(p.values[:-1], p.values[1:]):
        lo, hi = min(a, b), max(a, b)
        inner = levels[(levels > lo) & (levels < hi)]
        out.extend(float(s) for s in (inner if b > a else inner[::-1]))
        out.append(b)
    return ScalarPath(tuple(out))


def _weighted_increments(values: Sequence[float], psi: Psi) -> FloatArray:
    s = np.asarray(values, dtype=np.float64)
    weights = np.array([psi(float(x)) for x in s[:-1]], dtype=np.float64)
    return np.diff(s) * weights


def direct_sum(path: ScalarPath | Sequence[float], psi: Psi) -> float:
    """sum_n (s_{n+1} - s_n) psi(s_n) along the path as given."""
    return float(_weighted_increments(_as_path(path).values, psi).sum())


def monotone_sum(path: ScalarPath | Sequence[float], psi: Psi) -> float:
    """The same sum over the sorted distinct values in [s_0, s_K]."""
    p = _as_path(path)
    levels = np.unique(p.values)
    levels = levels[(levels >= p.start) & (levels <= p.end)]
    return float(_weighted_increments(levels, psi).sum())


def negative_part(path: ScalarPath | Sequence[float], psi: Psi) -> float:
    """Contribution of refined steps lying at or below s_0; never negative."""
    p = refine(path)
    s = np.asarray(p.values)
    below = np.maximum(s[:-1], s[1:]) <= p.start
    return float(_weighted_increments(p.values, psi)[below].sum())


@dataclass(frozen=True)
class ReindexCheck:
    passed: bool
    slack: float  # direct - monotone
    direct: float
    monotone: float
    negative_part: float


def check_lemma(path: ScalarPath | Sequence[float], psi: Psi) -> ReindexCheck:
    p = _as_path(path)
    direct = direct_sum(p, psi)
    mono = monotone_sum(p, psi)
    neg = negative_part(p, psi)
    slack = direct - mono
    return ReindexCheck(slack >= -REINDEX_TOL and neg >= -REINDEX_TOL, slack, direct, mono, neg)


def truncate_at_max(series: Sequence[float]) -> ScalarPath | None:
    """Prefix of a series up to its first maximum, or None if that is not a valid path."""
    s = np.asarray(series, dtype=np.float64)
    k = int(np.argmax(s))
    if k == 0 or not s[k] > s[0]:
        return None
    return ScalarPath(tuple(s[: k + 1]))


def linear_psi(slope: float) -> Psi:
    """psi(s) = 1 - slope * s."""
    return lambda s: 1.0 - slope * s
