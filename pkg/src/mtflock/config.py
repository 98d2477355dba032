"""Experiment configuration: a flat key=value file with dotted keys.

    # comment
    kernel.c1 = 0.1
    kernel.c2 = 0.5
    kernel.beta = 0.01
    init.mode = truncated-normal
    transition.h_list = 0.02, 0.01, 0.005
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import truncnorm

from mtflock.dynamics import SimParams
from mtflock.errors import ConfigError, DomainError
from mtflock.kernel import Kernel
from mtflock.state import Ensemble, delta_frobenius

INIT_MODES = ("uniform", "truncated-normal")


@dataclass(frozen=True)
class InitSpec:
    """Bounds double as the truncation interval in truncated-normal mode."""

    low: float = 0.0
    high: float = 1.0
    mean: float = 0.0
    sd: float = 1.0

    def validate(self, mode: str, label: str) -> None:
        for name, value in dataclasses.asdict(self).items():
            if not math.isfinite(value):
                raise ConfigError(f"init.{label}.{name} must be finite")
        if not self.low < self.high:
            raise ConfigError(f"init.{label}: need low < high, got [{self.low}, {self.high}]")
        if mode == "truncated-normal" and not self.sd > 0.0:
            raise ConfigError(f"init.{label}.sd must be positive")

    def sample(self, mode: str, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
        if mode == "uniform":
            return rng.uniform(self.low, self.high, size=shape)
        a = (self.low - self.mean) / self.sd
        b = (self.high - self.mean) / self.sd
        return truncnorm.rvs(a, b, loc=self.mean, scale=self.sd, size=shape, random_state=rng)


@dataclass(frozen=True)
class ExperimentConfig:
    c1: float
    c2: float
    beta: float
    kappa: float = 1.0
    h: float = 0.01
    steps: int = 2000
    n_particles: int = 20
    dim: int = 2
    init_mode: str = "uniform"
    seed: int = 0
    init_x: InitSpec = field(default_factory=InitSpec)
    init_v: InitSpec = field(default_factory=InitSpec)
    target_dx0: float | None = None  # multiple of M
    target_dv0: float | None = None  # multiple of the admissibility budget
    epsilon: float = 0.5
    strict: bool = False
    transition_T: float = 10.0
    transition_h_list: tuple[float, ...] = (0.02, 0.01, 0.005)
    transition_h_ref: float | None = None
    stability_perturbation: float = 1e-3
    reindex_paths: int = 1000
    sweep_beta: tuple[float, ...] = ()
    sweep_seed: tuple[int, ...] = ()
    sweep_n_particles: tuple[int, ...] = (10, 20, 50)
    sweep_workers: int = 1

    def __post_init__(self) -> None:
        try:
            kernel = self.kernel
            SimParams(kappa=self.kappa, h=self.h, steps=self.steps)
            for h in self.transition_h_list:
                SimParams(kappa=self.kappa, h=h, steps=0)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        if self.n_particles < 1 or self.dim < 1:
            raise ConfigError("n_particles and dim must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(f"init.mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        self.init_x.validate(self.init_mode, "x")
        self.init_v.validate(self.init_mode, "v")
        for name in ("target_dx0", "target_dv0"):
            value = getattr(self, name)
            if value is not None:
                if not (math.isfinite(value) and value > 0.0):
                    raise ConfigError(f"{name} must be a positive multiple")
                if kernel.is_constant:
                    raise ConfigError(f"{name} needs a finite flocking radius (non-constant kernel)")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not (self.transition_T > 0.0 and self.transition_h_list):
            raise ConfigError("transition needs T > 0 and a non-empty h_list")
        if not self.stability_perturbation >= 0.0:
            raise ConfigError("stability.perturbation must be >= 0")
        if self.seed < 0 or any(s < 0 for s in self.sweep_seed):
            raise ConfigError("seeds must be non-negative")
        if self.sweep_workers < 1 or self.reindex_paths < 0:
            raise ConfigError("sweep.workers must be >= 1 and reindex.paths >= 0")

    @property
    def kernel(self) -> Kernel:
        try:
            return Kernel(self.c1, self.c2, self.beta)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def params(self) -> SimParams:
        return SimParams(kappa=self.kappa, h=self.h, steps=self.steps, seed=self.seed)

    def replace(self, **changes: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


# key in the file -> (field name, parser)
def _flag(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


_SCALAR_KEYS: dict[str, tuple[str, Any]] = {
    "kernel.c1": ("c1", float),
    "kernel.c2": ("c2", float),
    "kernel.beta": ("beta", float),
    "kappa": ("kappa", float),
    "h": ("h", float),
    "steps": ("steps", int),
    "n_particles": ("n_particles", int),
    "dim": ("dim", int),
    "init.mode": ("init_mode", str.strip),
    "init.seed": ("seed", int),
    "target_dx0": ("target_dx0", float),
    "target_dv0": ("target_dv0", float),
    "epsilon": ("epsilon", float),
    "strict": ("strict", _flag),
    "transition.T": ("transition_T", float),
    "transition.h_list": ("transition_h_list", _floats),
    "transition.h_ref": ("transition_h_ref", float),
    "stability.perturbation": ("stability_perturbation", float),
    "reindex.paths": ("reindex_paths", int),
    "sweep.beta": ("sweep_beta", _floats),
    "sweep.seed": ("sweep_seed", _ints),
    "sweep.n_particles": ("sweep_n_particles", _ints),
    "sweep.workers": ("sweep_workers", int),
}
_INIT_FIELDS = ("low", "high", "mean", "sd")
REQUIRED_KEYS = ("kernel.c1", "kernel.c2", "kernel.beta")


def parse_config_text(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    kwargs: dict[str, Any] = {}
    shared: dict[str, float] = {}
    per_axis: dict[str, dict[str, float]] = {"x": {}, "v": {}}
    for key, value in raw.items():
        try:
            if key in _SCALAR_KEYS:
                name, parse = _SCALAR_KEYS[key]
                kwargs[name] = parse(value)
                continue
            parts = key.split(".")
            if len(parts) == 2 and parts[0] == "init" and parts[1] in _INIT_FIELDS:
                shared[parts[1]] = float(value)
                continue
            if len(parts) == 3 and parts[0] == "init" and parts[1] in per_axis and parts[2] in _INIT_FIELDS:
                per_axis[parts[1]][parts[2]] = float(value)
                continue
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
        raise ConfigError(f"unknown key {key!r}")

    kwargs["init_x"] = InitSpec(**{**shared, **per_axis["x"]})
    kwargs["init_v"] = InitSpec(**{**shared, **per_axis["v"]})
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def init_ensemble(cfg: ExperimentConfig) -> Ensemble:
    """Sample positions then velocities from one seeded generator.

    With target_dx0 the positions are recentered and scaled so that
    ||Delta^x(0)||_F = target_dx0 * M. With target_dv0 the velocities are
    scaled about their mean so that ||Delta^v(0)||_F is that multiple of the
    admissibility budget.
    """
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.n_particles, cfg.dim)
    x = cfg.init_x.sample(cfg.init_mode, rng, shape)
    v = cfg.init_v.sample(cfg.init_mode, rng, shape)
    kernel = cfg.kernel
    if cfg.target_dx0 is not None:
        x = x - x.mean(axis=0)
        dx = delta_frobenius(x)
        if dx == 0.0:
            raise ConfigError("cannot rescale coincident positions")
        x = x * (cfg.target_dx0 * kernel.flocking_radius() / dx)
    if cfg.target_dv0 is not None:
        m = kernel.flocking_radius()
        dx0 = delta_frobenius(x)
        budget = cfg.kappa * kernel.psi_integral(dx0, m) if dx0 < m else 0.0
        dv = delta_frobenius(v)
        if dv == 0.0:
            raise ConfigError("cannot rescale equal velocities")
        mean = v.mean(axis=0)
        v = mean + (v - mean) * (cfg.target_dv0 * budget / dv)
    return Ensemble(x, v)
