"""Native dense linear algebra on rank-2 Ndarrays.

Only row-major (C) layout exists. ``matmul`` accumulates in a fixed i,k,j
order so repeated runs are bitwise reproducible. ``inv`` and ``solve`` go
through a blocked LU factorisation with partial pivoting; a pivot smaller
than ``tol * max|A|`` means the matrix is singular to working precision.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from .errors import ShapeError, SingularMatrixError
from .ndarray import Kind, Ndarray, check_same_kind, check_shape

logger = logging.getLogger(__name__)

PIVOT_TOL = {Kind.F64: 1e-12, Kind.F32: 1e-5}
BLOCK = 64


def check_matrix(a: Ndarray, name: str = "a") -> Tuple[int, int]:
    if a.rank != 2:
        raise ShapeError(f"{name} must be a matrix, got shape {a.shape}")
    return a.shape


def _wrap(arr: np.ndarray, kind: Kind) -> Ndarray:
    arr = np.ascontiguousarray(arr, dtype=kind.dtype)
    return Ndarray._wrap(tuple(arr.shape), arr.reshape(-1), kind)


def eye(n: int, kind=Kind.F64) -> Ndarray:
    kind = Kind(kind)
    check_shape((n, n))
    return _wrap(np.eye(n, dtype=kind.dtype), kind)


def diag(values: Sequence[float], kind=Kind.F64) -> Ndarray:
    kind = Kind(kind)
    values = np.asarray(values, dtype=kind.dtype).reshape(-1)
    check_shape((values.size, values.size))
    return _wrap(np.diag(values), kind)


def transpose(a: Ndarray) -> Ndarray:
    """Materialised transpose."""
    check_matrix(a)
    return _wrap(a.numpy().T, a.kind)


def matmul(a: Ndarray, b: Ndarray) -> Ndarray:
    """C = A.B with the k loop outermost: C += A[:, k] (x) B[k, :] for k = 0..K-1."""
    m, k = check_matrix(a, "a")
    k2, n = check_matrix(b, "b")
    if k != k2:
        raise ShapeError(f"Inner dimensions differ: {a.shape} . {b.shape}")
    kind = check_same_kind(a, b)
    A, B = a.numpy(), b.numpy()
    C = np.zeros((m, n), dtype=kind.dtype)
    with np.errstate(all="ignore"):
        for p in range(k):
            C += A[:, p, None] * B[None, p, :]
    return _wrap(C, kind)


def _factor(A: np.ndarray, kind: Kind) -> np.ndarray:
    """Blocked right-looking LU of ``A`` in place; returns the row permutation.

    After the call the strict lower triangle holds L (unit diagonal implied)
    and the upper triangle holds U, with P.A = L.U where P selects rows
    ``perm``.
    """
    n = A.shape[0]
    perm = np.arange(n)
    amax = float(np.max(np.abs(A))) if A.size else 0.0
    threshold = PIVOT_TOL[kind] * amax
    if amax == 0.0 or not np.isfinite(amax):
        raise SingularMatrixError("Matrix is zero or non-finite")

    for k0 in range(0, n, BLOCK):
        k1 = min(k0 + BLOCK, n)
        # panel factorisation, updates restricted to the panel columns
        for k in range(k0, k1):
            p = k + int(np.argmax(np.abs(A[k:, k])))
            pivot = abs(A[p, k])
            if pivot < threshold or pivot == 0.0:
                raise SingularMatrixError(
                    f"Pivot {pivot:.3e} at column {k} below {threshold:.3e}")
            if p != k:
                A[[k, p]] = A[[p, k]]
                perm[[k, p]] = perm[[p, k]]
            A[k + 1:, k] /= A[k, k]
            if k + 1 < k1:
                A[k + 1:, k + 1:k1] -= np.outer(A[k + 1:, k], A[k, k + 1:k1])
        if k1 < n:
            # U12 = L11^-1 A12, then the trailing gemm update
            for i in range(k0 + 1, k1):
                A[i, k1:] -= A[i, k0:i] @ A[k0:i, k1:]
            A[k1:, k1:] -= A[k1:, k0:k1] @ A[k0:k1, k1:]
    return perm


def _forward(LU: np.ndarray, B: np.ndarray) -> None:
    """Solve L.X = B in place (unit lower triangle of LU)."""
    n = LU.shape[0]
    for k0 in range(0, n, BLOCK):
        k1 = min(k0 + BLOCK, n)
        for i in range(k0 + 1, k1):
            B[i] -= LU[i, k0:i] @ B[k0:i]
        if k1 < n:
            B[k1:] -= LU[k1:, k0:k1] @ B[k0:k1]


def _backward(LU: np.ndarray, B: np.ndarray) -> None:
    """Solve U.X = B in place (upper triangle of LU)."""
    n = LU.shape[0]
    for k1 in range(n, 0, -BLOCK):
        k0 = max(k1 - BLOCK, 0)
        for i in range(k1 - 1, k0 - 1, -1):
            if i + 1 < k1:
                B[i] -= LU[i, i + 1:k1] @ B[i + 1:k1]
            B[i] /= LU[i, i]
        if k0 > 0:
            B[:k0] -= LU[:k0, k0:k1] @ B[k0:k1]


def _factor_copy(a: Ndarray):
    m, n = check_matrix(a)
    if m != n:
        raise ShapeError(f"Matrix must be square, got {a.shape}")
    LU = np.array(a.numpy(), dtype=a.kind.dtype, copy=True)
    with np.errstate(all="ignore"):
        perm = _factor(LU, a.kind)
    return LU, perm


def lu(a: Ndarray) -> Tuple[Ndarray, Ndarray, Tuple[int, ...]]:
    """Factor ``a`` into (L, U, perm) with a[perm] = L.U."""
    LU, perm = _factor_copy(a)
    L = np.tril(LU, -1) + np.eye(LU.shape[0], dtype=LU.dtype)
    U = np.triu(LU)
    return _wrap(L, a.kind), _wrap(U, a.kind), tuple(int(p) for p in perm)


def solve(a: Ndarray, b: Ndarray) -> Ndarray:
    """X with a.X = b; ``b`` is a matrix [n;m] or a vector [n]."""
    kind = check_same_kind(a, b)
    n = a.shape[0]
    if b.rank not in (1, 2) or b.shape[0] != n:
        raise ShapeError(f"Right-hand side {b.shape} does not match matrix {a.shape}")
    LU, perm = _factor_copy(a)
    B = b.numpy().reshape(n, -1)[perm].astype(kind.dtype, copy=True)
    with np.errstate(all="ignore"):
        _forward(LU, B)
        _backward(LU, B)
    return _wrap(B.reshape(b.shape), kind)


def inv(a: Ndarray) -> Ndarray:
    check_matrix(a)
    logger.debug("Inverting %s matrix of kind %s", a.shape, a.kind.value)
    return solve(a, eye(a.shape[0], a.kind))


def det(a: Ndarray) -> float:
    """Determinant from the LU diagonal and the permutation parity."""
    try:
        LU, perm = _factor_copy(a)
    except SingularMatrixError:
        return 0.0
    sign = 1.0
    seen = np.zeros(perm.size, dtype=bool)
    for start in range(perm.size):
        # each cycle of length L contributes L-1 transpositions
        length, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length and length % 2 == 0:
            sign = -sign
    return sign * float(np.prod(np.diag(LU)))


def norm_inf(a: Ndarray) -> float:
    """Maximum absolute row sum."""
    check_matrix(a)
    return float(np.max(np.sum(np.abs(a.numpy()), axis=1)))
