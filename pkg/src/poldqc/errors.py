"""Exception hierarchy. The CLI maps each branch to a distinct exit code."""


class PoldqcError(Exception):
    """Base class for all package errors."""


class ParseError(PoldqcError):
    """Malformed config or data file. Carries a line number when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class ValidationError(PoldqcError):
    """Input violates a documented precondition (shape, range, enum)."""


class ConvergenceError(PoldqcError):
    """An iterative solve (SCF, relaxation, calibration) did not converge."""


class CalibrationError(ConvergenceError):
    """Root finding on a model parameter failed to reach its target."""


class NumericalError(PoldqcError):
    """Data-dependent numerical failure."""


class BoundaryLeakError(NumericalError):
    """A state has non-negligible amplitude at the grid edge."""


class DegenerateInputError(NumericalError):
    """Input lies in a null space (zero spectrum, deflation of a spanned state)."""


class PartitionError(NumericalError):
    """Eigenstate manifold classification failed (bad reference frequency
    or not enough states)."""
