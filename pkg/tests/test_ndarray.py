"""Tests for the ndarray core: creation, map, fold, scan and reshape."""

import math

import numpy as np
import pytest

from src import ndarray as nd
from src.errors import KindError, ShapeError
from src.ndarray import Kind, Ndarray


def test_creation_shapes_and_kinds():
    x = nd.zeros((2, 3), Kind.F32)
    assert x.shape == (2, 3)
    assert x.kind is Kind.F32
    assert x.data.dtype == np.float32
    assert nd.ones(4).tolist() == [1.0] * 4
    assert nd.create((2,), 7.5).tolist() == [7.5, 7.5]
    assert x.strides == (3, 1)


@pytest.mark.parametrize("shape", [(), (0,), (3, -1), "ab"])
def test_invalid_shapes_rejected(shape):
    with pytest.raises(ShapeError):
        nd.zeros(shape)


def test_buffer_must_fit_shape():
    with pytest.raises(ShapeError):
        Ndarray((2, 2), np.zeros(3))


def test_uniform_is_seeded_and_bounded():
    a = nd.uniform((50, 50), seed=7)
    b = nd.uniform((50, 50), seed=7)
    assert nd.equal(a, b)
    assert not nd.equal(a, nd.uniform((50, 50), seed=8))
    assert 0.0 <= nd.min(a) and nd.max(a) < 1.0


def test_get_set_row_major():
    x = nd.sequential((2, 3))
    assert x.get((1, 2)) == 5.0
    x.set((0, 1), -1.0)
    assert x.tolist() == [[0.0, -1.0, 2.0], [3.0, 4.0, 5.0]]
    with pytest.raises(IndexError):
        x.get((2, 0))


def test_map_examples():
    x = nd.of_array([1.0, -2.0, 3.0])
    assert nd.map(lambda v: -v, x).tolist() == [-1.0, 2.0, -3.0]
    assert nd.equal(nd.map(lambda v: v, x), x)
    assert nd.relu(nd.of_array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]
    assert x.tolist() == [1.0, -2.0, 3.0]


def test_fold_examples():
    assert nd.sum(nd.sequential(10)) == 45.0
    assert nd.min(nd.of_array([[3.0, 1.0], [2.0, 5.0]]), axis=0).tolist() == [2.0, 1.0]
    assert nd.std(nd.of_array([2.0, 2.0, 2.0, 2.0])) == 0.0


def test_fold_axis_reduces_rank():
    x = nd.sequential((2, 3, 4))
    assert nd.sum(x, axis=1).shape == (2, 4)
    assert nd.sum(nd.sequential(5), axis=0).shape == (1,)
    with pytest.raises(ShapeError):
        nd.sum(x, axis=3)


def test_fold_matches_plain_loop_bitwise(rng):
    x = nd.from_numpy(rng.normal(size=1000))
    acc = 0.0
    for v in x.data.tolist():
        acc += v
    assert nd.sum(x) == acc


def test_fold_with_python_function():
    x = nd.of_array([1.0, 2.0, 3.0, 4.0])
    assert nd.fold(lambda acc, v: acc + v * v, 0.0, x) == 30.0


def test_mean_var_std_population():
    x = nd.of_array([1.0, 2.0, 3.0, 4.0])
    assert nd.mean(x) == 2.5
    assert nd.var(x) == pytest.approx(1.25)
    assert nd.std(x) == pytest.approx(math.sqrt(1.25))
    assert nd.var(nd.of_array([[1.0, 3.0], [1.0, 3.0]]), axis=1).tolist() == [1.0, 1.0]


def test_scan_examples():
    assert nd.cumsum(nd.of_array([1.0, 2.0, 3.0])).tolist() == [1.0, 3.0, 6.0]
    assert nd.cumprod(nd.of_array([2.0, 2.0, 2.0])).tolist() == [2.0, 4.0, 8.0]
    assert nd.cumsum(nd.sequential((2, 3)), axis=1).tolist() == [[0.0, 1.0, 3.0], [3.0, 7.0, 12.0]]
    assert nd.cummin(nd.of_array([3.0, 1.0, 2.0])).tolist() == [3.0, 1.0, 1.0]
    assert nd.cummax(nd.of_array([1.0, 3.0, 2.0])).tolist() == [1.0, 3.0, 3.0]


def test_scan_with_python_function_matches_ufunc(rng):
    x = nd.from_numpy(rng.normal(size=(4, 5)))
    assert nd.equal(nd.scan(lambda a, b: a + b, x, axis=1), nd.cumsum(x, axis=1))


def test_scan_last_equals_fold(rng):
    x = nd.from_numpy(rng.normal(size=(6, 7)))
    last = nd.cumsum(x, axis=0).numpy()[-1]
    assert np.array_equal(last, nd.sum(x, axis=0).numpy())


@pytest.mark.parametrize("name", sorted(nd.UNARY_KERNELS))
def test_inplace_twin_matches_pure(name, rng):
    pure, inplace = nd.UNARY_OPS[name]
    x = nd.from_numpy(rng.uniform(0.1, 2.0, size=(3, 4)))
    expected = pure(x)
    buf = x.data
    out = inplace(x)
    assert out is x
    assert out.data is buf
    assert np.array_equal(out.data, expected.data, equal_nan=True)


def test_scalar_map_equals_vector_kernel(rng):
    x = nd.from_numpy(rng.uniform(-3.0, 3.0, size=100))
    assert nd.equal(nd.map(lambda v: max(0.0, v), x), nd.relu(x))
    assert nd.equal(nd.map(math.sqrt, nd.abs(x)), nd.sqrt(nd.abs(x)))
    assert nd.equal(nd.map(lambda v: -v, x), nd.neg(x))


def test_vmath_examples():
    assert nd.sin(nd.zeros(4)).tolist() == [0.0] * 4
    assert nd.sqrt(nd.of_array([4.0, 9.0])).tolist() == [2.0, 3.0]
    assert math.isnan(nd.log(nd.of_array([-1.0])).tolist()[0])
    assert nd.ceil(nd.of_array([0.2, -0.2])).tolist() == [1.0, -0.0]


def test_iterate_visits_every_element_in_order():
    seen = []
    nd.iterate(seen.append, nd.sequential((2, 2)))
    assert seen == [0.0, 1.0, 2.0, 3.0]
    calls = []
    nd.iterate(calls.append, nd.ones(1))
    assert len(calls) == 1


def test_iterate_sum_equals_fold(rng):
    x = nd.from_numpy(rng.normal(size=500))
    acc = [0.0]

    def add(v):
        acc[0] += v

    nd.iterate(add, x)
    assert acc[0] == nd.sum(x)


def test_reshape_and_flatten():
    x = nd.reshape(nd.sequential(6), (2, 3))
    assert x.tolist() == [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]
    assert nd.equal(nd.reshape(x, x.shape), x)
    assert nd.flatten(x).tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    with pytest.raises(ShapeError):
        nd.reshape(x, (4,))


def test_copy_is_independent():
    x = nd.sequential(3)
    y = nd.copy(x)
    y.set((0,), 9.0)
    assert x.get((0,)) == 0.0


def test_kind_mismatch_raises():
    with pytest.raises(KindError):
        nd.check_same_kind(nd.zeros(2, Kind.F32), nd.zeros(2))


def test_approx_equal_tolerance():
    a = nd.of_array([1.0, 2.0])
    assert nd.approx_equal(a, nd.of_array([1.0, 2.0 + 1e-14]))
    assert not nd.approx_equal(a, nd.of_array([1.0, 2.1]))
