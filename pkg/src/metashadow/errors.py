"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class SingularCalibrationError(DomainError):
    """A calibrated channel coefficient is too close to zero to invert."""
