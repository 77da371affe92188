"""Exception types shared across the package."""

from __future__ import annotations


class GridMismatchError(ValueError):
    """Operands live on different grids or time grids."""


class ConfigError(ValueError):
    """Invalid run configuration. Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LinearSolverError(RuntimeError):
    """An inner linear solve failed to reach the requested residual."""

    def __init__(self, system: str, iterations: int, relative_residual: float,
                 step: int | None = None):
        self.system = system
        self.iterations = iterations
        self.relative_residual = relative_residual
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(
            f"{system} solve{at} stopped after {iterations} iterations "
            f"with relative residual {relative_residual:.3e}")


class DivergenceError(RuntimeError):
    """A computed field left the representable range (NaN/Inf)."""

    def __init__(self, what: str, step: int | None = None):
        self.what = what
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite values in {what}{at}")
