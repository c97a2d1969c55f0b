"""Exception hierarchy shared by all modules."""


class HeatwaveError(Exception):
    """Base class for package errors."""


class DomainError(HeatwaveError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class TruncationError(HeatwaveError, ArithmeticError):
    """A series could not be certified to the requested tolerance."""

    def __init__(self, message, terms_needed=None, max_terms=None):
        super().__init__(message)
        self.terms_needed = terms_needed
        self.max_terms = max_terms


class QuadratureError(HeatwaveError, ArithmeticError):
    """Adaptive quadrature did not reach its tolerance."""

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class ShapeError(HeatwaveError, ValueError):
    """Grid fields do not match their grid."""


class AlignmentError(HeatwaveError, ValueError):
    """A sub-lattice is not aligned with its parent lattice."""


class CapacityError(HeatwaveError, OverflowError):
    """Index space of the counter-based generator is exhausted."""


class ConfigurationError(HeatwaveError, ValueError):
    """Invalid or inconsistent run configuration."""


class InstabilityError(HeatwaveError, ArithmeticError):
    """An iteration or time-stepping loop diverged."""


class BlowUpError(InstabilityError):
    """Non-finite values appeared in a solver run."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
