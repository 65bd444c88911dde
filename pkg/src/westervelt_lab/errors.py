"""Exception types raised by the workbench.

Every numerical failure that a sweep may hit is a typed error so that sweep
drivers can record it instead of emitting NaN rows.
"""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class ConfigError(WorkbenchError):
    """Malformed or inconsistent configuration."""


class GridError(WorkbenchError):
    """Grid too small or inconsistent for the requested operation."""


class DomainError(WorkbenchError):
    """Point outside the domain of an evaluator."""


class NumericalBreakdown(WorkbenchError):
    """Base class for failures of a numerical method."""


class NonFiniteState(NumericalBreakdown):
    pass


class TrappedRayError(NumericalBreakdown):
    pass


class FrameDegeneracyError(NumericalBreakdown):
    pass


class ChartInversionError(NumericalBreakdown):
    pass


class JacobiDegeneracyError(NumericalBreakdown):
    pass


class BranchTrackingError(NumericalBreakdown):
    pass


class NonlinearDegeneracy(NumericalBreakdown):
    """The Westervelt coefficient 1 - 2*beta*c^2*u dropped below threshold."""

    def __init__(self, message, min_factor=None, step=None):
        super().__init__(message)
        self.min_factor = min_factor
        self.step = step


class SolverDivergence(NumericalBreakdown):
    """CG or Picard iteration failed to converge."""


class ResolutionError(WorkbenchError):
    """A grid-resolution guard tripped (sampling too coarse for tau)."""


class CFLError(ResolutionError):
    pass
