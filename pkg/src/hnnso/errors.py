"""Exception types shared across the package."""


class HnnsoError(Exception):
    """Base class for all package errors."""


class ShapeError(HnnsoError, ValueError):
    """Operands have incompatible shapes."""


class ValidationError(HnnsoError, ValueError):
    """An argument or configuration value is out of its allowed domain."""


class NumericalError(HnnsoError, ArithmeticError):
    """A numerical routine failed (no convergence, singular system, divergence)."""


class ContractError(HnnsoError, RuntimeError):
    """A call violated a usage contract (e.g. stale or mismatched cache)."""


class FormatError(HnnsoError, ValueError):
    """A file could not be parsed (bad magic, truncation, malformed record)."""
