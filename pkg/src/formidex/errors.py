"""Exception types shared across the package."""


class FormidexError(Exception):
    """Base class for all package errors."""


class ConfigError(FormidexError, ValueError):
    """Invalid user input: parameters, case files, grids."""


class NumericalError(FormidexError, ArithmeticError):
    """A numerical evaluation failed (singular matrix, non-finite values, pole hit)."""

    def __init__(self, message, s=None):
        if s is not None:
            message = f"{message} (s = {complex(s):.6g})"
        super().__init__(message)
        self.s = s
