"""Exception hierarchy shared by all modules."""


class LoschmidtError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(LoschmidtError, ValueError):
    """Array shapes are inconsistent with the phase-space dimension."""


class CausticEncountered(LoschmidtError, ArithmeticError):
    """A center generating function or amplitude is singular."""


class UnsupportedDegenerate(LoschmidtError, ValueError):
    """Singular but nonzero Hessian combined with a linear term."""


class ConvergenceError(LoschmidtError, RuntimeError):
    """Implicit-midpoint fixed-point iteration did not converge."""

    def __init__(self, message, step=None, index=None):
        super().__init__(message)
        self.step = step
        self.index = index


class MatrixOverflow(LoschmidtError, OverflowError):
    """Matrix exponential produced non-finite entries."""


class GridError(LoschmidtError, ValueError):
    """Quantum grid too narrow, aliased, or Hamiltonian not separable."""


class ConfigError(LoschmidtError, ValueError):
    """Run configuration failed validation."""
