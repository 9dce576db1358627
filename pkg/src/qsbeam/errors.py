"""Exception types shared across the package.

ConfigError maps to CLI exit code 2, NumericalError to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (bad JSON, bad ranges, bad keys)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (singular system, solver non-convergence)."""


class SolverError(NumericalError):
    """Iterative solver hit its iteration cap; carries the best iterate."""

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals or {}
