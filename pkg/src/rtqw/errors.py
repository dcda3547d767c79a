"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input fails a structural invariant (non-unitary coin, bad probabilities...)."""


class DimensionMismatchError(ValidationError):
    """Objects built for different lattice or coin dimensions were combined."""


class EnumerationGuardError(ValueError):
    """An exhaustive enumeration would exceed the configured size guard."""


class SupportGuardError(ValueError):
    """A lattice computation would exceed the configured support guard."""


class AssumptionFailedError(RuntimeError):
    """A spectral-gap assumption required by an operation does not hold."""


class TrackingLostError(RuntimeError):
    """The tracked simple eigenvalue drifted too far from 1."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget without converging."""


class DegenerateMaximumError(RuntimeError):
    """A torus maximum is flat but not constant, outside the supported class."""
