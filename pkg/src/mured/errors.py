"""Exception hierarchy. Every failure a caller can act on gets its own type."""


class MuredError(Exception):
    """Base class for all mured errors."""


class InvalidTableError(MuredError):
    """A contingency table violates its invariants (negative cells, zero total, bad shape)."""


class UnknownVariableError(MuredError):
    """A variable name is not present in the table or event log."""


class SubsetTooLargeError(MuredError):
    """Subset enumeration over 2^n sub-subsets would exceed the hard cap."""


class UndefinedRedundancyError(MuredError):
    """Channel redundancy is undefined because the capacity term is zero."""


class UndefinedSimilarityError(MuredError):
    """Similarity is undefined: zero vector for cosine, zero variance for Pearson."""


class InvalidMatrixError(MuredError):
    """A matrix input violates the operation's preconditions."""


class ConvergenceError(MuredError):
    """Power iteration did not reach the residual tolerance within max_iter."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateSpectrumError(MuredError):
    """Iteration oscillates between two directions: tied dominant eigenvalue magnitudes."""


class IdentityCheckError(MuredError):
    """An internal cross-check identity failed beyond tolerance."""


class ParseError(MuredError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
