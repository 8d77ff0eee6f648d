"""Exception hierarchy shared by all modules."""


class BreachOddsError(Exception):
    """Base class for every error raised by this package."""


class ParseError(BreachOddsError, ValueError):
    """Malformed input text. Carries the offending 1-based line number."""

    def __init__(self, message, line=None, source=None):
        self.message = message
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class StructuralError(BreachOddsError, ValueError):
    """Input parsed but violates calendar structure (gaps, misalignment)."""


class DomainError(BreachOddsError, ValueError):
    """Argument outside the domain an operation is defined on."""


class NumericalError(BreachOddsError, ArithmeticError):
    """Numerical failure: rank deficiency, underflow, failed factorization."""


class EstimationError(BreachOddsError, RuntimeError):
    """An estimator failed to produce a usable fit."""
