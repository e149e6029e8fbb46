"""Foldwise: functional n-dimensional arrays, differentiation and training"""

from .configuration import Configuration
from .errors import (DifferentiationError, DivergenceError, EngineError, FoldwiseError, KindError,
                     ProtocolError, ReuseViolationError, ShapeError, SingularMatrixError, SliceError,
                     UnassignedVariableError, UnsupportedOperationError)
from .ndarray import Kind, Ndarray

__all__ = [
    'Configuration', 'Kind', 'Ndarray',
    'FoldwiseError', 'ShapeError', 'KindError', 'SliceError', 'SingularMatrixError',
    'DifferentiationError', 'UnassignedVariableError', 'ReuseViolationError', 'DivergenceError',
    'EngineError', 'ProtocolError', 'UnsupportedOperationError',
]
