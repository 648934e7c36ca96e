"""Exception types shared across the package.

Argument problems raise the builtin ``ValueError``; the classes below cover
bad input data and numerical degeneracy so the CLI can map them to distinct
exit codes.
"""


class DebiasLassoError(Exception):
    """Base class for package-specific failures."""


class DataError(DebiasLassoError):
    """Input data could not be read or violates a dataset invariant."""


class DegenerateError(DebiasLassoError):
    """A numerical quantity is degenerate (zero variance, singular system, ...)."""


class CalibrationError(DegenerateError):
    """No positive signal strength reaches the requested R^2."""


class SimulationAborted(DebiasLassoError):
    """Too many replications failed for the report to be meaningful."""
