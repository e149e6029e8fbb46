"""Broadcasting binary operators.

Two shapes are compatible when, after left-padding the lower-rank one with
1s, every dimension pair is equal or one side is 1. Same-shape operands go
through a flat kernel; everything else through the strided general kernel.
Both paths apply the same numpy ufunc, so their results are bitwise equal.

Elementwise comparisons (``elt_gt`` ...) return 0/1 arrays of the operands'
kind; whole-array comparisons (``gt`` ...) return a single bool that holds
when the relation holds for every element.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Tuple

import numpy as np

from . import ndarray as nd
from .errors import ShapeError
from .ndarray import Kind, Ndarray, check_same_kind, check_shape, numel


class Stretch(Enum):
    NONE = "none"
    LEFT = "left"     # left operand has size 1 here
    RIGHT = "right"   # right operand has size 1 here


@dataclass(frozen=True)
class BroadcastPlan:
    shape_a: Tuple[int, ...]
    shape_b: Tuple[int, ...]
    out_shape: Tuple[int, ...]
    stretch: Tuple[Stretch, ...]
    same_shape: bool


def broadcast_plan(shape_a, shape_b) -> BroadcastPlan:
    shape_a, shape_b = check_shape(shape_a), check_shape(shape_b)
    rank = len(shape_a) if len(shape_a) > len(shape_b) else len(shape_b)
    pa = (1,) * (rank - len(shape_a)) + shape_a
    pb = (1,) * (rank - len(shape_b)) + shape_b
    out, stretch = [], []
    for da, db in zip(pa, pb):
        if da == db:
            out.append(da)
            stretch.append(Stretch.NONE)
        elif da == 1:
            out.append(db)
            stretch.append(Stretch.LEFT)
        elif db == 1:
            out.append(da)
            stretch.append(Stretch.RIGHT)
        else:
            raise ShapeError(f"Shapes {shape_a} and {shape_b} cannot be broadcast")
    return BroadcastPlan(pa, pb, tuple(out), tuple(stretch), shape_a == shape_b)


def _quiet():
    return np.errstate(all="ignore")


BINARY_KERNELS: Dict[str, np.ufunc] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.true_divide,
    "pow": np.power,
    "min2": np.minimum,
    "max2": np.maximum,
    "atan2": np.arctan2,
    "fmod": np.fmod,
}

COMMUTATIVE = frozenset({"add", "mul", "min2", "max2"})


def binop(name: str, a: Ndarray, b: Ndarray, force_general: bool = False) -> Ndarray:
    """Apply the named broadcasting operator. ``force_general`` skips the same-shape fast path."""
    kernel = BINARY_KERNELS[name]
    kind = check_same_kind(a, b)
    plan = broadcast_plan(a.shape, b.shape)
    if plan.same_shape and not force_general:
        out = np.empty(a.size, dtype=kind.dtype)
        with _quiet():
            kernel(a.data, b.data, out=out)
        return Ndarray._wrap(a.shape, out, kind)
    out = np.empty(plan.out_shape, dtype=kind.dtype)
    with _quiet():
        kernel(a.data.reshape(plan.shape_a), b.data.reshape(plan.shape_b), out=out)
    return Ndarray._wrap(plan.out_shape, out.reshape(-1), kind)


def binop_into(name: str, a: Ndarray, b: Ndarray, out: Ndarray) -> Ndarray:
    """Same-shape in-place application writing into ``out`` (which must be ``a`` or ``b``)."""
    if not (a.shape == b.shape == out.shape):
        raise ShapeError(f"In-place {name} needs equal shapes, got {a.shape}, {b.shape}")
    check_same_kind(a, b)
    with _quiet():
        BINARY_KERNELS[name](a.data, b.data, out=out.data)
    return out


def _scalar(kind: Kind, s: float):
    return kind.dtype.type(s)


def binop_scalar(name: str, a: Ndarray, s: float) -> Ndarray:
    out = np.empty(a.size, dtype=a.kind.dtype)
    with _quiet():
        BINARY_KERNELS[name](a.data, _scalar(a.kind, s), out=out)
    return Ndarray._wrap(a.shape, out, a.kind)


def scalar_binop(name: str, s: float, a: Ndarray) -> Ndarray:
    out = np.empty(a.size, dtype=a.kind.dtype)
    with _quiet():
        BINARY_KERNELS[name](_scalar(a.kind, s), a.data, out=out)
    return Ndarray._wrap(a.shape, out, a.kind)


def _family(name: str):
    def pure(a: Ndarray, b: Ndarray) -> Ndarray:
        return binop(name, a, b)

    def inplace(a: Ndarray, b: Ndarray) -> Ndarray:
        return binop_into(name, a, b, a)

    def with_scalar(a: Ndarray, s: float) -> Ndarray:
        return binop_scalar(name, a, s)

    def scalar_with(s: float, a: Ndarray) -> Ndarray:
        return scalar_binop(name, s, a)

    pure.__name__, inplace.__name__ = name, name + "_"
    with_scalar.__name__, scalar_with.__name__ = name + "_scalar", "scalar_" + name
    return pure, inplace, with_scalar, scalar_with


add, add_, add_scalar, scalar_add = _family("add")
sub, sub_, sub_scalar, scalar_sub = _family("sub")
mul, mul_, mul_scalar, scalar_mul = _family("mul")
div, div_, div_scalar, scalar_div = _family("div")
pow, pow_, pow_scalar, scalar_pow = _family("pow")
min2, min2_, min2_scalar, scalar_min2 = _family("min2")
max2, max2_, max2_scalar, scalar_max2 = _family("max2")
atan2, atan2_, atan2_scalar, scalar_atan2 = _family("atan2")
fmod, fmod_, fmod_scalar, scalar_fmod = _family("fmod")


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------

_COMPARE: Dict[str, Callable] = {
    "gt": np.greater,
    "lt": np.less,
    "eq": np.equal,
    "ge": np.greater_equal,
    "le": np.less_equal,
}


def _compare(name: str, a: Ndarray, b: Ndarray) -> np.ndarray:
    check_same_kind(a, b)
    plan = broadcast_plan(a.shape, b.shape)
    with _quiet():
        return _COMPARE[name](a.data.reshape(plan.shape_a), b.data.reshape(plan.shape_b))


def _elt(name: str):
    def elementwise(a: Ndarray, b: Ndarray) -> Ndarray:
        mask = _compare(name, a, b)
        return Ndarray._wrap(mask.shape, mask.astype(a.kind.dtype).reshape(-1), a.kind)

    def scalar(a: Ndarray, s: float) -> Ndarray:
        with _quiet():
            mask = _COMPARE[name](a.data, _scalar(a.kind, s))
        return Ndarray._wrap(a.shape, mask.astype(a.kind.dtype), a.kind)

    def whole(a: Ndarray, b: Ndarray) -> bool:
        return bool(np.all(_compare(name, a, b)))

    elementwise.__name__, scalar.__name__, whole.__name__ = "elt_" + name, "elt_" + name + "_scalar", name
    return elementwise, scalar, whole


elt_gt, elt_gt_scalar, gt = _elt("gt")
elt_lt, elt_lt_scalar, lt = _elt("lt")
elt_eq, elt_eq_scalar, eq = _elt("eq")
elt_ge, elt_ge_scalar, ge = _elt("ge")
elt_le, elt_le_scalar, le = _elt("le")


def broadcast_to(x: Ndarray, shape) -> Ndarray:
    """Materialise ``x`` stretched to ``shape``."""
    shape = check_shape(shape)
    plan = broadcast_plan(x.shape, shape)
    if plan.out_shape != shape:
        raise ShapeError(f"Cannot broadcast {x.shape} to {shape}")
    flat = np.ascontiguousarray(np.broadcast_to(x.data.reshape(plan.shape_a), shape)).reshape(-1)
    return Ndarray._wrap(shape, flat, x.kind)


def sum_to(x: Ndarray, shape) -> Ndarray:
    """Reduce ``x`` over the dimensions that broadcasting stretched from ``shape``."""
    shape = check_shape(shape)
    if x.shape == shape:
        return x
    plan = broadcast_plan(shape, x.shape)
    if plan.out_shape != x.shape:
        raise ShapeError(f"Cannot reduce {x.shape} to {shape}")
    lead = x.rank - len(shape)
    acc = x
    # fold stretched axes from the last one so earlier axis numbers stay valid
    for axis in range(x.rank - 1, -1, -1):
        stretched = axis < lead or plan.shape_a[axis] == 1 and x.shape[axis] != 1
        if stretched:
            if acc.rank == 1:
                acc = nd.create((1,), nd.sum(acc), acc.kind)
            else:
                acc = nd.sum(acc, axis)
    if numel(shape) != acc.size:
        raise ShapeError(f"Cannot reduce {x.shape} to {shape}")
    return nd.reshape(acc, shape)
