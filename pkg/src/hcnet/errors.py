"""Exception hierarchy shared by every hcnet module."""


class HCNError(Exception):
    """Base class for all hcnet errors."""


class SpecError(HCNError, ValueError):
    """A network description could not be turned into a valid NetworkSpec."""


class SpecSyntaxError(SpecError):
    """The network document is not well-formed JSON."""

    def __init__(self, msg, line=None, column=None):
        if line is not None:
            msg = f"{msg} (line {line}, column {column})"
        super().__init__(msg)
        self.line = line
        self.column = column


class ValidationError(SpecError):
    """The document parsed but violates a NetworkSpec invariant."""


class PreconditionError(HCNError):
    """An operation was called on an input it is not defined for."""


class UnstableSystemError(PreconditionError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class NumericalError(HCNError, ArithmeticError):
    """Non-convergence, overflow or divergence in a numerical routine."""
