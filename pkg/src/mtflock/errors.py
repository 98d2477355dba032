"""Exception types raised across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(ValueError):
    """A check was requested on data that does not meet its hypotheses."""


class DivergenceError(ArithmeticError):
    """A trajectory produced a non-finite state."""

    def __init__(self, step: int, message: str | None = None) -> None:
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class ConvergenceError(RuntimeError):
    """A trajectory has not flocked far enough to extract a limit."""

    def __init__(self, final_dv: float, initial_dv: float) -> None:
        self.final_dv = final_dv
        self.initial_dv = initial_dv
        super().__init__(
            f"velocity discrepancy {final_dv:.3e} has not fallen below "
            f"1e-10 * {initial_dv:.3e}"
        )


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""
