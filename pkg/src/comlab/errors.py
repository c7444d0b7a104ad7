"""Exception hierarchy shared by every comlab module."""


class ComlabError(Exception):
    """Base class for all comlab errors."""


class SpecError(ComlabError, ValueError):
    """Malformed or inconsistent variety/ensemble/config specification."""


class PreconditionError(ComlabError, ValueError):
    """An operation was called with inputs violating its precondition."""


class NumericError(ComlabError, ArithmeticError):
    """A numerical routine failed (non-convergence, loss of rank, ...)."""


class RankError(NumericError):
    """A vector family is linearly dependent within tolerance."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ImmersionError(NumericError):
    """The Kähler hessian lost positivity at a parameter point."""

    def __init__(self, message, w=None):
        super().__init__(message)
        self.w = w
