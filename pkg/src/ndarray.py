"""Dense row-major n-dimensional arrays.

All vectorised maths is derived from three primitives: ``map`` (elementwise),
``fold`` (reduction) and ``scan`` (prefix accumulation). Each unary math
function has an in-place twin with a trailing underscore (``sin_``) that
overwrites its argument's buffer and returns the argument; the twins exist for
buffer reuse inside the lazy graph and should not be needed by application code.

Reductions without ``axis`` return a plain float; with ``axis`` they return an
array whose rank is reduced by one (a rank-1 input reduces to shape ``(1,)``
because zero-dimensional arrays are not allowed).
"""

import functools
import math
from enum import Enum
from typing import Any, Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import KindError, ShapeError

Shape = Tuple[int, ...]


class Kind(str, Enum):
    """Element precision."""
    F32 = "f32"
    F64 = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is Kind.F32 else np.dtype(np.float64)

    @classmethod
    def of_dtype(cls, dtype) -> "Kind":
        return cls.F32 if np.dtype(dtype) == np.float32 else cls.F64


def check_shape(shape) -> Shape:
    """Normalise ``shape`` to a tuple of positive ints, raising ShapeError otherwise."""
    if isinstance(shape, (int, np.integer)):
        shape = (shape,)
    try:
        dims = tuple(int(d) for d in shape)
    except (TypeError, ValueError):
        raise ShapeError(f"Shape must be a sequence of ints, got {shape!r}")
    if not dims:
        raise ShapeError("Shape must have at least one dimension")
    if any(d < 1 for d in dims):
        raise ShapeError(f"All dimensions must be >= 1, got {dims}")
    return dims


def numel(shape: Shape) -> int:
    return functools.reduce(lambda a, b: a * b, shape, 1)


def row_major_strides(shape: Shape) -> Shape:
    """Element strides of a C-layout array: the last dimension has stride 1."""
    strides = [1] * len(shape)
    for j in range(len(shape) - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]
    return tuple(strides)


class Ndarray:
    """A dense tensor: shape, flat row-major buffer and element kind."""

    __slots__ = ("_shape", "_data", "_kind")

    def __init__(self, shape, data, kind: Union[Kind, str] = Kind.F64):
        kind = Kind(kind)
        shape = check_shape(shape)
        buf = np.ascontiguousarray(data, dtype=kind.dtype).reshape(-1)
        if buf.size != numel(shape):
            raise ShapeError(f"Buffer of {buf.size} elements does not fit shape {shape}")
        self._shape = shape
        self._data = buf
        self._kind = kind

    @classmethod
    def _wrap(cls, shape: Shape, flat: np.ndarray, kind: Kind) -> "Ndarray":
        """Build without validation; ``flat`` must already be a contiguous 1-D buffer."""
        obj = cls.__new__(cls)
        obj._shape = shape
        obj._data = flat
        obj._kind = kind
        return obj

    @property
    def shape(self) -> Shape:
        return self._shape

    @property
    def kind(self) -> Kind:
        return self._kind

    @property
    def data(self) -> np.ndarray:
        """The flat row-major buffer (not a copy)."""
        return self._data

    @property
    def rank(self) -> int:
        return len(self._shape)

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def strides(self) -> Shape:
        return row_major_strides(self._shape)

    def numpy(self) -> np.ndarray:
        """Shaped numpy view over the buffer."""
        return self._data.reshape(self._shape)

    def __array__(self, dtype=None, copy=None):
        view = self.numpy()
        return view if dtype is None else view.astype(dtype)

    def offset(self, index: Sequence[int]) -> int:
        if len(index) != self.rank:
            raise ShapeError(f"Index {tuple(index)} has wrong rank for shape {self._shape}")
        off = 0
        for i, n, s in zip(index, self._shape, self.strides):
            if not 0 <= i < n:
                raise IndexError(f"Index {tuple(index)} out of bounds for shape {self._shape}")
            off += i * s
        return off

    def get(self, index: Sequence[int]) -> float:
        return float(self._data[self.offset(index)])

    def set(self, index: Sequence[int], value: float) -> None:
        self._data[self.offset(index)] = value

    def copy(self) -> "Ndarray":
        return Ndarray._wrap(self._shape, self._data.copy(), self._kind)

    def tolist(self) -> list:
        return self.numpy().tolist()

    def __repr__(self) -> str:
        body = np.array2string(self.numpy(), threshold=20, edgeitems=3)
        return f"Ndarray(shape={list(self._shape)}, kind={self._kind.value},\n{body})"


def check_same_kind(a: Ndarray, b: Ndarray) -> Kind:
    if a.kind is not b.kind:
        raise KindError(f"Cannot combine {a.kind.value} with {b.kind.value}")
    return a.kind


def check_axis(axis: int, rank: int) -> int:
    if not isinstance(axis, (int, np.integer)) or not 0 <= axis < rank:
        raise ShapeError(f"Axis {axis!r} out of range for rank {rank}")
    return int(axis)


def _reduced_shape(shape: Shape, axis: int) -> Shape:
    out = shape[:axis] + shape[axis + 1:]
    return out or (1,)


def _quiet():
    # domain violations produce IEEE NaN/Inf, never errors or warnings
    return np.errstate(all="ignore")


# ---------------------------------------------------------------------------
# creation
# ---------------------------------------------------------------------------

def create(shape, value: float, kind: Union[Kind, str] = Kind.F64) -> Ndarray:
    shape, kind = check_shape(shape), Kind(kind)
    return Ndarray._wrap(shape, np.full(numel(shape), value, dtype=kind.dtype), kind)


def zeros(shape, kind: Union[Kind, str] = Kind.F64) -> Ndarray:
    return create(shape, 0.0, kind)


def ones(shape, kind: Union[Kind, str] = Kind.F64) -> Ndarray:
    return create(shape, 1.0, kind)


def sequential(shape, kind: Union[Kind, str] = Kind.F64, start: float = 0.0, step: float = 1.0) -> Ndarray:
    """Fill with start, start+step, ... in row-major order."""
    shape, kind = check_shape(shape), Kind(kind)
    flat = np.arange(numel(shape), dtype=kind.dtype)
    if step != 1.0:
        flat = flat * kind.dtype.type(step)
    if start != 0.0:
        flat = flat + kind.dtype.type(start)
    return Ndarray._wrap(shape, flat, kind)


def uniform(shape, seed: Optional[int] = None, kind: Union[Kind, str] = Kind.F64,
            low: float = 0.0, high: float = 1.0) -> Ndarray:
    """I.i.d. draws from U[low, high) using a seeded PCG64 generator."""
    shape, kind = check_shape(shape), Kind(kind)
    rng = np.random.default_rng(seed)
    flat = rng.random(numel(shape), dtype=kind.dtype)
    if (low, high) != (0.0, 1.0):
        flat = (kind.dtype.type(low) + kind.dtype.type(high - low) * flat).astype(kind.dtype)
    return Ndarray._wrap(shape, flat, kind)


def gaussian(shape, seed: Optional[int] = None, kind: Union[Kind, str] = Kind.F64,
             mu: float = 0.0, sigma: float = 1.0) -> Ndarray:
    shape, kind = check_shape(shape), Kind(kind)
    rng = np.random.default_rng(seed)
    flat = rng.normal(mu, sigma, numel(shape)).astype(kind.dtype)
    return Ndarray._wrap(shape, flat, kind)


def of_array(values: Iterable[float], shape=None, kind: Union[Kind, str] = Kind.F64) -> Ndarray:
    """Build from (possibly nested) Python sequences; ``shape`` defaults to the nesting."""
    arr = np.asarray(values, dtype=Kind(kind).dtype)
    return Ndarray(arr.shape if shape is None else shape, arr, kind)


def from_numpy(arr: np.ndarray, kind: Union[Kind, str, None] = None) -> Ndarray:
    arr = np.asarray(arr)
    kind = Kind.of_dtype(arr.dtype) if kind is None else Kind(kind)
    return Ndarray(arr.shape if arr.ndim else (1,), arr, kind)


# ---------------------------------------------------------------------------
# map
# ---------------------------------------------------------------------------

def elementwise(fn: Callable) -> Callable:
    """Mark ``fn(a, out)`` as a whole-buffer kernel that ``map`` can call directly."""
    fn.vectorised = True
    return fn


def _is_kernel(f) -> bool:
    return (isinstance(f, np.ufunc) and f.nin == 1) or getattr(f, "vectorised", False)


def _run_kernel(kernel, a: np.ndarray, out: np.ndarray) -> np.ndarray:
    with _quiet():
        if isinstance(kernel, np.ufunc):
            kernel(a, out=out)
        else:
            kernel(a, out)
    return out


def map(f: Callable[[float], float], x: Ndarray) -> Ndarray:
    """out[i] = f(x[i]) for every linear index i; ``x`` is left untouched.

    ``f`` is either a scalar Python function or a whole-buffer kernel
    (a unary numpy ufunc or a function decorated with ``elementwise``).
    """
    if _is_kernel(f):
        out = _run_kernel(f, x.data, np.empty_like(x.data))
    else:
        with _quiet():
            out = np.fromiter((f(v) for v in x.data.tolist()), dtype=x.kind.dtype, count=x.size)
    return Ndarray._wrap(x.shape, out, x.kind)


def iterate(f: Callable[[float], Any], x: Ndarray) -> None:
    """Call ``f`` on every element in row-major order."""
    for v in x.data.tolist():
        f(v)


@elementwise
def _relu(a, out):
    np.maximum(a, 0.0, out=out)


@elementwise
def _sigmoid(a, out):
    np.negative(a, out=out)
    np.exp(out, out=out)
    np.add(out, 1.0, out=out)
    np.reciprocal(out, out=out)


UNARY_KERNELS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "neg": np.negative,
    "relu": _relu,
    "ceil": np.ceil,
    "floor": np.floor,
    "sigmoid": _sigmoid,
    "tanh": np.tanh,
    "abs": np.abs,
    "sqr": np.square,
}


def _unary_pair(name: str):
    kernel = UNARY_KERNELS[name]

    def pure(x: Ndarray) -> Ndarray:
        return map(kernel, x)

    def inplace(x: Ndarray) -> Ndarray:
        _run_kernel(kernel, x.data, x.data)
        return x

    pure.__name__, inplace.__name__ = name, name + "_"
    pure.__doc__ = f"Elementwise {name}."
    inplace.__doc__ = f"In-place elementwise {name}; overwrites and returns ``x``."
    return pure, inplace


sin, sin_ = _unary_pair("sin")
cos, cos_ = _unary_pair("cos")
tan, tan_ = _unary_pair("tan")
exp, exp_ = _unary_pair("exp")
log, log_ = _unary_pair("log")
sqrt, sqrt_ = _unary_pair("sqrt")
neg, neg_ = _unary_pair("neg")
relu, relu_ = _unary_pair("relu")
ceil, ceil_ = _unary_pair("ceil")
floor, floor_ = _unary_pair("floor")
sigmoid, sigmoid_ = _unary_pair("sigmoid")
tanh, tanh_ = _unary_pair("tanh")
abs, abs_ = _unary_pair("abs")
sqr, sqr_ = _unary_pair("sqr")

UNARY_OPS = {name: (globals()[name], globals()[name + "_"]) for name in UNARY_KERNELS}


# ---------------------------------------------------------------------------
# fold
# ---------------------------------------------------------------------------

def _is_binary_ufunc(f) -> bool:
    return isinstance(f, np.ufunc) and f.nin == 2


def fold(f: Callable[[Any, float], Any], init, x: Ndarray, axis: Optional[int] = None):
    """Left fold in row-major order.

    Without ``axis`` returns the scalar f(...f(f(init, x0), x1)..., xn).
    With ``axis`` folds every line along that axis and returns an array of
    the remaining dimensions. Binary numpy ufuncs are folded with
    ``accumulate``, which keeps the strict left-to-right order.
    """
    dtype = x.kind.dtype
    if axis is None:
        if _is_binary_ufunc(f):
            with _quiet():
                seq = np.concatenate((np.array([init], dtype=dtype), x.data))
                return float(f.accumulate(seq, dtype=dtype)[-1])
        acc = init
        for v in x.data.tolist():
            acc = f(acc, v)
        return acc

    axis = check_axis(axis, x.rank)
    out_shape = _reduced_shape(x.shape, axis)
    arr = x.numpy()
    if _is_binary_ufunc(f):
        slab = list(x.shape)
        slab[axis] = 1
        with _quiet():
            seq = np.concatenate((np.full(slab, init, dtype=dtype), arr), axis=axis)
            res = np.take(f.accumulate(seq, axis=axis, dtype=dtype), -1, axis=axis)
    else:
        lines = np.moveaxis(arr, axis, -1).reshape(-1, x.shape[axis])
        res = np.array([functools.reduce(f, line.tolist(), init) for line in lines], dtype=dtype)
    return Ndarray._wrap(out_shape, np.ascontiguousarray(res, dtype=dtype).reshape(-1), x.kind)


def sum(x: Ndarray, axis: Optional[int] = None):
    return fold(np.add, 0.0, x, axis)


def prod(x: Ndarray, axis: Optional[int] = None):
    return fold(np.multiply, 1.0, x, axis)


def min(x: Ndarray, axis: Optional[int] = None):
    return fold(np.minimum, math.inf, x, axis)


def max(x: Ndarray, axis: Optional[int] = None):
    return fold(np.maximum, -math.inf, x, axis)


def mean(x: Ndarray, axis: Optional[int] = None):
    if axis is None:
        return sum(x) / x.size
    s = sum(x, axis)
    return Ndarray._wrap(s.shape, s.data / x.shape[axis], x.kind)


def var(x: Ndarray, axis: Optional[int] = None):
    """Population variance (divides by n)."""
    if axis is None:
        m = mean(x)
        with _quiet():
            dev = x.data - x.kind.dtype.type(m)
        return sum(Ndarray._wrap(x.shape, dev * dev, x.kind)) / x.size
    axis = check_axis(axis, x.rank)
    keep = list(x.shape)
    keep[axis] = 1
    m = mean(x, axis).data.reshape(keep)
    with _quiet():
        dev = (x.numpy() - m).reshape(-1)
    s = sum(Ndarray._wrap(x.shape, dev * dev, x.kind), axis)
    return Ndarray._wrap(s.shape, s.data / x.shape[axis], x.kind)


def std(x: Ndarray, axis: Optional[int] = None):
    """Population standard deviation."""
    v = var(x, axis)
    if axis is None:
        return math.sqrt(v)
    return sqrt_(v)


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def scan(f: Callable[[Any, float], float], x: Ndarray, axis: int = 0) -> Ndarray:
    """Prefix accumulation along ``axis``; out has the same shape as ``x``."""
    axis = check_axis(axis, x.rank)
    dtype = x.kind.dtype
    arr = x.numpy()
    if _is_binary_ufunc(f):
        with _quiet():
            out = f.accumulate(arr, axis=axis, dtype=dtype)
    else:
        moved = np.moveaxis(arr, axis, -1).copy()
        lines = moved.reshape(-1, x.shape[axis])
        for line in lines:
            acc = line[0]
            for j in range(1, line.size):
                acc = f(acc, line[j])
                line[j] = acc
        out = np.moveaxis(lines.reshape(moved.shape), -1, axis)
    return Ndarray._wrap(x.shape, np.ascontiguousarray(out, dtype=dtype).reshape(-1), x.kind)


def cumsum(x: Ndarray, axis: int = 0) -> Ndarray:
    return scan(np.add, x, axis)


def cumprod(x: Ndarray, axis: int = 0) -> Ndarray:
    return scan(np.multiply, x, axis)


def cummin(x: Ndarray, axis: int = 0) -> Ndarray:
    return scan(np.minimum, x, axis)


def cummax(x: Ndarray, axis: int = 0) -> Ndarray:
    return scan(np.maximum, x, axis)


# ---------------------------------------------------------------------------
# shape manipulation and comparison
# ---------------------------------------------------------------------------

def reshape(x: Ndarray, shape) -> Ndarray:
    """Same buffer, new shape descriptor."""
    shape = check_shape(shape)
    if numel(shape) != x.size:
        raise ShapeError(f"Cannot reshape {x.shape} ({x.size} elements) to {shape}")
    return Ndarray._wrap(shape, x.data, x.kind)


def flatten(x: Ndarray) -> Ndarray:
    return reshape(x, (x.size,))


def copy(x: Ndarray) -> Ndarray:
    return x.copy()


def equal(a: Ndarray, b: Ndarray) -> bool:
    """Bitwise equality of shape, kind and every element."""
    return a.shape == b.shape and a.kind is b.kind and a.data.tobytes() == b.data.tobytes()


def approx_equal(a: Ndarray, b: Ndarray, tol: float = 1e-12) -> bool:
    return a.shape == b.shape and bool(np.allclose(a.data, b.data, rtol=tol, atol=tol))
