"""Exception types shared across the package."""


class SpecteigError(Exception):
    """Base class for all package-specific errors."""


class DimError(SpecteigError, ValueError):
    """Dimension mismatch between tensors, operators or vectors."""


class ArityError(SpecteigError, ValueError):
    """Wrong number of blocks or an order with the wrong parity."""


class DuplicateEntryError(SpecteigError, ValueError):
    """Two entries map to the same canonical index class."""


class DomainError(SpecteigError, ValueError):
    """Argument outside the mathematical domain of the routine."""


class NumericalError(SpecteigError, ArithmeticError):
    """A solver produced a non-finite intermediate quantity."""


class DenominatorError(SpecteigError, ArithmeticError):
    """Denominator form is zero or not positive where it must be."""


class ConfigError(SpecteigError, ValueError):
    """Inconsistent problem or solver configuration."""


class ParseError(SpecteigError, ValueError):
    """Malformed tensor or polynomial input file."""
