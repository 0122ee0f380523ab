"""Classical-shadow tomography simulation and reconstruction toolkit."""

__version__ = "0.1.0"

from .errors import DomainError, SingularCalibrationError

__all__ = ["DomainError", "SingularCalibrationError", "__version__"]
