from __future__ import annotations

import numpy as np
import pytest

from mtflock.config import ExperimentConfig, init_ensemble
from mtflock.kernel import Kernel
from mtflock.state import Ensemble

REF_KERNEL = Kernel(0.1, 0.5, 0.5)
FLAT = Kernel(1.0, 1.0, 0.0)


def admissible_config(
    beta: float, n: int = 10, d: int = 2, seed: int = 0, fx: float = 0.9, fv: float = 0.9, **kw
) -> ExperimentConfig:
    """Seeded config whose initial data sits at fractions fx of M and fv of the budget."""
    return ExperimentConfig(
        c1=0.1, c2=0.5, beta=beta, n_particles=n, dim=d, seed=seed, target_dx0=fx, target_dv0=fv, **kw
    )


def admissible_ensemble(beta: float, n: int = 10, d: int = 2, seed: int = 0, **kw) -> Ensemble:
    return init_ensemble(admissible_config(beta, n, d, seed, **kw))


def random_ensemble(rng: np.random.Generator, n: int | None = None, d: int | None = None, scale: float = 1.0) -> Ensemble:
    n = n or int(rng.integers(1, 8))
    d = d or int(rng.integers(1, 4))
    return Ensemble(scale * rng.normal(size=(n, d)), rng.normal(size=(n, d)))


def two_particles(v=(1.0, -1.0), x=(0.0, 1.0)) -> Ensemble:
    return Ensemble(np.array(x, dtype=float)[:, None], np.array(v, dtype=float)[:, None])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
