"""
Correctness checks for benchmarked operations.
Timings are only reported; results are compared against numpy references.
"""

import hashlib
from typing import Any, Dict

import numpy as np

from src import broadcast as bc
from src import linalg as la
from src.ndarray import Ndarray

from bench.src.benchmark_suite import BenchInputs, reference_results

INV_RESIDUAL_TOL = 1e-8
SUM_RTOL = 1e-9


def digest(result: Any) -> str:
    """sha256 of an operation result, stable across runs with the same seed."""
    h = hashlib.sha256()
    if isinstance(result, Ndarray):
        h.update(repr(result.shape).encode())
        h.update(result.kind.value.encode())
        h.update(result.data.tobytes())
    else:
        h.update(repr(result).encode())
    return h.hexdigest()


class BenchEvaluator:
    """
    Compares each operation's result with an independent reference.
    """

    def __init__(self, inputs: BenchInputs):
        """Initialize evaluator with the benchmark operands."""
        self.inputs = inputs
        self.references = reference_results(inputs)

    def evaluate(self, op: str, result: Any) -> Dict[str, Any]:
        """
        Check one result.

        Returns:
            Dictionary with 'passed' and a short 'detail'
        """
        try:
            if op == "inv(x)":
                n = self.inputs.x.shape[0]
                residual = la.norm_inf(bc.sub(la.matmul(self.inputs.x, result), la.eye(n, result.kind)))
                return {'passed': residual <= INV_RESIDUAL_TOL, 'detail': f"residual {residual:.3e}"}
            expected = self.references[op]
            if isinstance(expected, float):
                ok = bool(np.isclose(float(result), expected, rtol=SUM_RTOL, atol=0.0))
                return {'passed': ok, 'detail': f"{float(result)!r} vs {expected!r}"}
            got = result.numpy()
            ok = got.shape == expected.shape and bool(np.array_equal(got, expected))
            return {'passed': ok, 'detail': f"shape {list(got.shape)}"}
        except Exception as e:
            print(f"    Evaluation error for {op}: {e}")
            return {'passed': False, 'detail': f"ERROR: {e}"}
