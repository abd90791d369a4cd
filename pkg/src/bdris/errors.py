"""Exception types shared across the bdris package."""


class RisError(Exception):
    """Base class for all bdris errors."""


class SingularMatrixError(RisError):
    """A linear solve hit a matrix whose reciprocal condition number is below the cap."""


class AssumptionViolation(RisError):
    """An impedance matrix does not satisfy the structural assumptions of the simplified model."""


class QuadratureNotConverged(RisError):
    """Doubling the quadrature order changed the integral beyond the relative tolerance."""


class InvalidGeometry(RisError):
    """Dipole placement is physically inconsistent (overlapping wires, spacing below diameter)."""


class InvalidArchitecture(RisError):
    """Group count does not divide the element count."""


class DimensionMismatch(RisError):
    """Array shapes are inconsistent with the declared architecture."""


class ThetaNearIdentity(RisError):
    """A reflection matrix has an eigenvalue too close to +1; the impedance image diverges."""


class CostGuardExceeded(RisError):
    """Brute-force search refused: the requested grid is beyond the configured cost cap."""


class NonMonotoneGain(RisError):
    """The iterative objective decreased beyond the allowed slack; the step size is too large."""


class ConfigError(RisError):
    """A scenario configuration file is missing keys or holds malformed values."""


class NeumannConditionWarning(UserWarning):
    """The step size exceeds 1% of the linearization validity bound for the current iterate."""
