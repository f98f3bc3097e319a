"""Exception hierarchy shared by all fewspace modules."""


class FewspaceError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(FewspaceError, ValueError):
    """Mismatched number of variables between spaces, points or domains."""


class DomainError(FewspaceError, ValueError):
    """A point lies outside the open set on which an atom is defined."""


class KernelOverflow(FewspaceError, OverflowError):
    """A kernel value is not representable in double precision."""


class SingularEvaluation(FewspaceError, ArithmeticError):
    """log K(x, x) or its Hessian is not finite at the requested point."""


class NonDiagonalSpace(FewspaceError, ValueError):
    """No explicit diagonal orthonormal basis is available for the space."""


class NegativeDensity(FewspaceError, ArithmeticError):
    """A mixed density came out more negative than round-off allows."""


class UnsupportedDimension(FewspaceError, ValueError):
    pass


class MonteCarloError(FewspaceError, RuntimeError):
    pass


class SpecError(FewspaceError, ValueError):
    """Malformed space-spec document; carries an optional source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
