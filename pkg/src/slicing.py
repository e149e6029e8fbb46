"""Basic and fancy slicing in ``[start:stop:step]`` style.

Stops are INCLUSIVE: ``Range(6, -1)`` reaches the last index and
``Range(-1, 0)`` walks backwards down to index 0. When the step is omitted
its sign follows the direction from start to stop. Slices that select no
element are rejected because zero-size arrays are not allowed.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ShapeError, SliceError
from .ndarray import Ndarray, numel


@dataclass(frozen=True)
class All:
    """Select the whole dimension."""


@dataclass(frozen=True)
class Index:
    """Select a single index; the dimension is kept with size 1."""
    i: int


@dataclass(frozen=True)
class Range:
    start: int
    stop: int
    step: Optional[int] = None


@dataclass(frozen=True)
class IndexList:
    """Explicit index list (fancy indexing); may be unordered or repeated."""
    indices: Tuple[int, ...]

    def __init__(self, indices: Sequence[int]):
        object.__setattr__(self, "indices", tuple(int(i) for i in indices))


SliceEntry = Union[All, Index, Range]
FancyEntry = Union[All, Index, Range, IndexList]


def _resolve(i: int, n: int, what: str) -> int:
    if not -n <= i < n:
        raise SliceError(f"{what} {i} out of bounds for dimension of size {n}")
    return i + n if i < 0 else i


def normalise(entry: SliceEntry, n: int) -> Tuple[int, int, int]:
    """Resolve an entry against a dimension of size ``n`` to (start, stop, step), stop inclusive."""
    if isinstance(entry, All):
        return 0, n - 1, 1
    if isinstance(entry, Index):
        i = _resolve(entry.i, n, "Index")
        return i, i, 1
    if isinstance(entry, Range):
        start = _resolve(entry.start, n, "Start")
        stop = _resolve(entry.stop, n, "Stop")
        step = entry.step
        if step is None:
            step = 1 if stop >= start else -1
        if step == 0:
            raise SliceError("Slice step cannot be zero")
        if (stop - start) * step < 0:
            raise SliceError(f"Slice {entry} selects no element")
        return start, stop, step
    raise SliceError(f"Unsupported slice entry {entry!r}")


def _extent(start: int, stop: int, step: int) -> int:
    return (stop - start) // step + 1


def _as_py_slice(start: int, stop: int, step: int) -> slice:
    end = stop + (1 if step > 0 else -1)
    return slice(start, end if end >= 0 else None, step)


def _pad(spec: Sequence, x: Ndarray) -> List:
    spec = list(spec)
    if len(spec) > x.rank:
        raise SliceError(f"Slice of rank {len(spec)} applied to array of rank {x.rank}")
    return spec + [All()] * (x.rank - len(spec))


def index_sequences(spec: Sequence[FancyEntry], shape: Sequence[int]) -> List[List[int]]:
    """Per-dimension index sequences a spec selects, in output order."""
    seqs = []
    for entry, n in zip(list(spec) + [All()] * (len(shape) - len(spec)), shape):
        if isinstance(entry, IndexList):
            if not entry.indices:
                raise SliceError("Index list cannot be empty")
            seqs.append([_resolve(i, n, "Index") for i in entry.indices])
        else:
            start, stop, step = normalise(entry, n)
            seqs.append(list(range(start, stop + (1 if step > 0 else -1), step)))
    return seqs


def _basic_key(spec: Sequence[SliceEntry], x: Ndarray):
    key, shape = [], []
    for entry, n in zip(_pad(spec, x), x.shape):
        if isinstance(entry, IndexList):
            raise SliceError("Index lists require get_fancy/set_fancy")
        start, stop, step = normalise(entry, n)
        key.append(_as_py_slice(start, stop, step))
        shape.append(_extent(start, stop, step))
    return tuple(key), tuple(shape)


def slice_shape(spec: Sequence[SliceEntry], x: Ndarray) -> Tuple[int, ...]:
    return _basic_key(spec, x)[1]


def get_slice(spec: Sequence[SliceEntry], x: Ndarray) -> Ndarray:
    """Copy out the selected region; missing trailing entries mean All."""
    key, shape = _basic_key(spec, x)
    region = np.ascontiguousarray(x.numpy()[key])
    return Ndarray._wrap(shape, region.reshape(-1), x.kind)


def set_slice(spec: Sequence[SliceEntry], x: Ndarray, y: Ndarray) -> None:
    """Write ``y`` into the selected region of ``x``; nothing else changes."""
    key, shape = _basic_key(spec, x)
    if y.shape != shape:
        raise ShapeError(f"Value of shape {y.shape} does not match slice shape {shape}")
    x.numpy()[key] = y.numpy()


def _fancy_key(spec: Sequence[FancyEntry], x: Ndarray):
    seqs = index_sequences(_pad(spec, x), x.shape)
    return np.ix_(*[np.asarray(s, dtype=np.intp) for s in seqs]), tuple(len(s) for s in seqs), seqs


def get_fancy(spec: Sequence[FancyEntry], x: Ndarray) -> Ndarray:
    key, shape, _ = _fancy_key(spec, x)
    region = np.ascontiguousarray(x.numpy()[key])
    return Ndarray._wrap(shape, region.reshape(-1), x.kind)


def set_fancy(spec: Sequence[FancyEntry], x: Ndarray, y: Ndarray) -> None:
    """Like set_slice; a repeated index in any list is an ambiguous write and rejected."""
    key, shape, seqs = _fancy_key(spec, x)
    for d, seq in enumerate(seqs):
        if len(set(seq)) != len(seq):
            raise SliceError(f"Repeated index in dimension {d} makes set_fancy ambiguous")
    if y.shape != shape:
        raise ShapeError(f"Value of shape {y.shape} does not match selection shape {shape}")
    x.numpy()[key] = y.numpy()


def parse_slice(text: str) -> List[SliceEntry]:
    """Parse the compact CLI syntax, e.g. ``"0:4,6:-1,-1:0"`` or ``"*,0:499"``.

    Dimensions are comma separated; a field is ``*`` (or empty) for All, a
    single int for Index, ``start:stop`` or ``start:stop:step`` for Range.
    """
    spec: List[SliceEntry] = []
    for field in text.split(","):
        field = field.strip()
        if field in ("", "*"):
            spec.append(All())
            continue
        parts = field.split(":")
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise SliceError(f"Cannot parse slice field {field!r}")
        if len(nums) == 1:
            spec.append(Index(nums[0]))
        elif len(nums) in (2, 3):
            spec.append(Range(*nums))
        else:
            raise SliceError(f"Too many ':' in slice field {field!r}")
    return spec


def selection_size(spec: Sequence[SliceEntry], x: Ndarray) -> int:
    return numel(slice_shape(spec, x))
