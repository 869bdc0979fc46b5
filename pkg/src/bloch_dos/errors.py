"""Exception hierarchy.

Errors are split by who has to act on them: ConfigError means the input
description is malformed, PreconditionError means the inputs are well formed
but outside the regime a routine is contracted for, SolverError means a
numerical kernel failed to produce a trustworthy answer.
"""


class BlochDosError(Exception):
    """Base class for all package errors."""


class ConfigError(BlochDosError):
    """Malformed or inconsistent run configuration."""


class PreconditionError(BlochDosError):
    """Inputs are valid but violate a documented precondition."""


class SolverError(BlochDosError):
    """A numerical routine failed (non-convergence, factorization breakdown)."""


class CutoffTooSmallError(PreconditionError):
    """Plane-wave cutoff too small for the requested spectral window."""


class DegenerateBandError(PreconditionError):
    """Operation requires a simple band but the computed gap is below threshold."""


class TrackingError(SolverError):
    """Band continuation between nearby k-points could not be certified."""
