"""Exception hierarchy shared by every module."""


class QExcitonError(Exception):
    """Base class for package errors."""


class ConfigError(QExcitonError, ValueError):
    """Invalid input, configuration, or precondition violation."""


class NumericalError(QExcitonError, ArithmeticError):
    """Non-convergence or a singular linear system."""
