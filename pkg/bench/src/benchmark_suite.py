"""
Benchmark operation set.
One entry per row of the benchmark table, each a callable over the prepared inputs.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from src import broadcast as bc
from src import linalg as la
from src import ndarray as nd
from src.ndarray import Ndarray
from src.slicing import get_slice, parse_slice


@dataclass
class BenchInputs:
    """The seeded operands every benchmarked operation reads."""
    x: Ndarray
    y: Ndarray
    half: int

    @classmethod
    def create(cls, size: int, seed: int) -> "BenchInputs":
        x = nd.uniform((size, size), seed)
        y = nd.uniform((size, size), seed + 1)
        return cls(x, y, max(0, size // 2 - 1))


def _iter_count(x: Ndarray) -> float:
    seen = [0]

    def visit(_):
        seen[0] += 1

    nd.iterate(visit, x)
    return float(seen[0])


def _operations(lib, inp: BenchInputs) -> Dict[str, Callable[[], object]]:
    rows = parse_slice(f"*,0:{inp.half}")
    cols = parse_slice(f"0:{inp.half},*")
    relu = nd.UNARY_KERNELS["relu"]
    return {
        "slice [*;0:499]": lambda: get_slice(rows, inp.x),
        "slice [0:499;*]": lambda: get_slice(cols, inp.x),
        "relu (map)": lambda: lib.map(relu, inp.x),
        "sum (fold)": lambda: lib.sum(inp.x),
        "cumsum (scan)": lambda: nd.cumsum(inp.x, 0),
        "x + y": lambda: bc.add(inp.x, inp.y),
        "inv(x)": lambda: la.inv(inp.x),
        "iter": lambda: _iter_count(inp.x),
    }


OPERATIONS: List[str] = [
    "slice [*;0:499]", "slice [0:499;*]", "relu (map)", "sum (fold)",
    "cumsum (scan)", "x + y", "inv(x)", "iter",
]


def build_operations(inp: BenchInputs, lib=None, ops: Optional[List[str]] = None) -> Dict[str, Callable[[], object]]:
    """
    Bind the operation set to ``inp``.

    Args:
        inp: Prepared operands
        lib: ndarray surface used for map and fold rows (the plain module or a parallel one)
        ops: Subset of ``OPERATIONS`` to keep, in their table order
    """
    table = _operations(lib or nd, inp)
    if ops is None:
        return table
    unknown = [op for op in ops if op not in table]
    if unknown:
        raise ValueError(f"Unknown benchmark operations: {unknown}; choose from {OPERATIONS}")
    return {op: table[op] for op in OPERATIONS if op in ops}


def reference_results(inp: BenchInputs) -> Dict[str, object]:
    """Independent numpy results for every operation except ``inv(x)``, which is checked by residual."""
    xn, yn = inp.x.numpy(), inp.y.numpy()
    h = inp.half + 1
    return {
        "slice [*;0:499]": xn[:, :h],
        "slice [0:499;*]": xn[:h, :],
        "relu (map)": np.maximum(xn, 0.0),
        "sum (fold)": float(xn.sum()),
        "cumsum (scan)": np.cumsum(xn, axis=0),
        "x + y": xn + yn,
        "iter": float(xn.size),
    }
