"""Exception types shared across the package."""


class BarronPDEError(Exception):
    """Base class for all package-specific errors."""


class LatticeMismatchError(BarronPDEError):
    """Two atom maps on different lattices were combined."""


class ConjugateSymmetryError(BarronPDEError):
    """Stored atoms break the invariant c(-z) == conj(c(z))."""


class AtomBudgetError(BarronPDEError):
    """An operation would exceed the configured atom cap."""


class ConstructionError(BarronPDEError):
    """A requested construction is impossible on the given lattice."""


class SchemaError(BarronPDEError):
    """A structured input file violates its schema.

    `pointer` is a JSON pointer to the offending field.
    """

    def __init__(self, message: str, pointer: str = "/"):
        super().__init__(message)
        self.pointer = pointer


class A3ViolationError(BarronPDEError):
    """The smallness precondition needed by a solve is not met."""


class DivergenceError(BarronPDEError):
    """An iteration failed to converge; carries the partial trace."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SolverError(BarronPDEError):
    """An internal certificate check failed; indicates a bug, not bad input."""
