"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or broke down numerically."""


class SingularMatrixError(NumericError):
    """A symmetric factorization failed (matrix not positive definite)."""


class DomainError(ValueError):
    """An input violates its mathematical domain (e.g. off the simplex)."""


class DataError(ValueError):
    """A dataset is malformed (bad CSV, missing labels, ...)."""


class ConfigError(ValueError):
    """A run configuration is invalid or contains unknown keys."""
