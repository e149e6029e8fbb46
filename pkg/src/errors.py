"""Exception hierarchy for Foldwise.

Every error derives from ``FoldwiseError`` and from the closest builtin, so
callers can catch either.
"""


class FoldwiseError(Exception):
    """Base class for all library errors."""


class ShapeError(FoldwiseError, ValueError):
    """Invalid shape, element-count mismatch or broadcast incompatibility."""


class KindError(FoldwiseError, TypeError):
    """Operands of different element kinds (f32 vs f64)."""


class SliceError(FoldwiseError, IndexError):
    """Bad slice or fancy-index specification."""


class SingularMatrixError(FoldwiseError, ArithmeticError):
    """Matrix is singular to working precision."""


class DifferentiationError(FoldwiseError, ValueError):
    """Contract violation inside a derivative computation."""


class UnassignedVariableError(FoldwiseError, LookupError):
    """A lazy variable was evaluated before being assigned."""


class ReuseViolationError(FoldwiseError, AssertionError):
    """A lazy buffer was about to be overwritten while still needed."""


class DivergenceError(FoldwiseError, ArithmeticError):
    """Optimisation produced a non-finite loss."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history or [])


class EngineError(FoldwiseError, RuntimeError):
    """Misuse of a parallel engine."""


class ProtocolError(EngineError):
    """Parameter-server protocol violation (unknown worker, double push...)."""


class UnsupportedOperationError(FoldwiseError, NotImplementedError):
    """Operation has no distributed counterpart."""
