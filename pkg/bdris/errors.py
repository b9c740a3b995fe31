"""
Exception hierarchy for the BD-RIS toolkit.

Service modules declare their own concrete errors on top of these roots.
The command-line entry point maps ``InvalidInputError`` to exit code 1 and
``NumericalError`` to exit code 2.
"""


class BDRISError(Exception):
    """Base exception for all toolkit errors."""
    pass


class InvalidInputError(BDRISError):
    """Exception raised when arguments or configuration fail validation."""
    pass


class NumericalError(BDRISError):
    """Exception raised when a computation is ill-posed or fails numerically."""
    pass


class DimensionMismatchError(InvalidInputError):
    """Exception raised when array shapes are mutually inconsistent."""
    pass


class SingularMatrixError(NumericalError):
    """Exception raised when a required matrix inverse does not exist."""
    pass
