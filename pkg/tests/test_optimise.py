"""Tests for the configurable optimiser and the minimise loop."""

import numpy as np
import pytest

from src import algodiff as ad
from src import ndarray as nd
from src.errors import DivergenceError, ShapeError
from src.optimise import (Batch, Gradient, LearningRate, Loss, Optimiser, Params, Regularisation,
                          Stopping, as_float, loss_eval, minimize)


def _square(th, xb, yb):
    return ad.sum(th["t"] * th["t"])


def _least_squares(th, xb, yb):
    return loss_eval(Loss.QUADRATIC, ad.matmul(xb, th["w"]), yb)


def _regression_data(n=20, d=3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = x @ rng.normal(size=(d, 1))
    return nd.from_numpy(x), nd.from_numpy(y)


@pytest.mark.parametrize("changes", [
    dict(epochs=0.0),
    dict(batch=Batch.Mini(0)),
    dict(regularisation=Regularisation.L1norm(-1.0)),
    dict(stopping=Stopping.ConstThreshold(-1.0)),
    dict(gradient=Gradient.Momentum(1.0)),
    dict(gradient=Gradient.Adagrad(), learning_rate=LearningRate.Adagrad(1.)),
])
def test_params_validation(changes):
    with pytest.raises(ValueError):
        Params(**changes)


def test_config_keeps_unnamed_defaults():
    p = Params.config(1000., learning_rate=LearningRate.Adagrad(1.))
    assert p.epochs == 1000.0
    assert p.batch == Batch.Full()
    assert p.with_(epochs=5).learning_rate == LearningRate.Adagrad(1.)


def test_loss_examples():
    t = nd.of_array([[1.0, 0.0], [0.0, 1.0]])
    assert as_float(loss_eval(Loss.QUADRATIC, t, t).value) == 0.0
    assert as_float(loss_eval(Loss.HINGE, nd.of_array([2.0]), nd.of_array([1.0])).value) == 0.0
    assert as_float(loss_eval(Loss.HINGE, nd.of_array([0.0]), nd.of_array([1.0])).value) == 1.0
    assert as_float(loss_eval(Loss.CROSS_ENTROPY, t, t).value) <= 1e-6
    half = as_float(loss_eval(Loss.QUADRATIC, nd.of_array([[3.0]]), nd.of_array([[1.0]])).value)
    assert half == 2.0
    with pytest.raises(ShapeError):
        loss_eval(Loss.QUADRATIC, nd.zeros((2, 1)), nd.zeros((3, 1)))


def test_gd_step():
    opt = Optimiser(Params(learning_rate=LearningRate.Const(0.1)))
    out = opt.step({"t": nd.of_array([1.0])}, {"t": nd.of_array([2.0])})
    assert out["t"].tolist() == [pytest.approx(0.8)]
    assert opt.state.iteration == 1


def test_adagrad_rate_first_step():
    opt = Optimiser(Params(learning_rate=LearningRate.Adagrad(1.)))
    out = opt.step({"t": nd.of_array([1.0])}, {"t": nd.of_array([3.0])})
    assert opt.state.rate_acc["t"].tolist() == [9.0]
    assert out["t"].tolist()[0] == pytest.approx(1.0 - 3.0 / (3.0 + 1e-8), abs=1e-15)


def test_adagrad_accumulator_non_decreasing(rng):
    opt = Optimiser(Params(learning_rate=LearningRate.Adagrad(0.5)))
    theta = {"t": nd.from_numpy(rng.normal(size=4))}
    previous = np.zeros(4)
    for _ in range(10):
        theta = opt.step(theta, {"t": nd.from_numpy(rng.normal(size=4))})
        acc = opt.state.rate_acc["t"].numpy()
        assert np.all(acc >= previous)
        previous = acc.copy()


def test_momentum_velocity():
    opt = Optimiser(Params(gradient=Gradient.Momentum(0.5), learning_rate=LearningRate.Const(1.0)))
    theta = {"t": nd.of_array([0.0])}
    theta = opt.step(theta, {"t": nd.of_array([1.0])})
    assert theta["t"].tolist() == [-1.0]
    theta = opt.step(theta, {"t": nd.of_array([1.0])})
    assert opt.state.velocity["t"].tolist() == [-1.5]
    assert theta["t"].tolist() == [-2.5]


def test_decay_schedules():
    opt = Optimiser(Params(learning_rate=LearningRate.Decay(1.0, 1.0)))
    theta = {"t": nd.of_array([0.0])}
    theta = opt.step(theta, {"t": nd.of_array([1.0])})
    theta = opt.step(theta, {"t": nd.of_array([1.0])})
    assert theta["t"].tolist() == [-1.5]


def test_l1_contributes_nothing_at_zero():
    opt = Optimiser(Params(regularisation=Regularisation.L1norm(0.5), learning_rate=LearningRate.Const(1.0)))
    out = opt.step({"t": nd.of_array([0.0, 2.0, -2.0])}, {"t": nd.zeros(3)})
    assert out["t"].tolist() == [0.0, 1.5, -1.5]


def test_l1_never_pushes_past_zero():
    opt = Optimiser(Params(regularisation=Regularisation.L1norm(0.5), learning_rate=LearningRate.Const(1.0)))
    theta = {"t": nd.of_array([0.1, -0.3, 0.0, 0.0, 2.0])}
    theta = opt.step(theta, {"t": nd.of_array([0.0, 0.0, 0.3, -0.4, 1.0])})
    assert theta["t"].tolist() == [0.0, 0.0, 0.0, 0.0, 0.5]
    theta = opt.step(theta, {"t": nd.zeros(5)})
    assert theta["t"].tolist() == [0.0, 0.0, 0.0, 0.0, 0.0]


def test_l1_threshold_follows_elementwise_adagrad_rate():
    params = Params(regularisation=Regularisation.L1norm(0.5), learning_rate=LearningRate.Adagrad(1.))
    out = Optimiser(params).step({"t": nd.of_array([4.0, 4.0])}, {"t": nd.of_array([1.0, 2.0])})
    rate = 1.0 / (np.array([1.0, 2.0]) + 1e-8)
    z = 4.0 - rate * np.array([1.0, 2.0])
    assert np.allclose(out["t"].numpy(), z - 0.5 * rate, rtol=0, atol=1e-15)


def test_l2_skips_unregularised_names():
    params = Params(regularisation=Regularisation.L2norm(0.25), learning_rate=LearningRate.Const(1.0))
    opt = Optimiser(params, unregularised=("b",))
    theta = {"w": nd.of_array([2.0]), "b": nd.of_array([2.0])}
    out = opt.step(theta, {"w": nd.zeros(1), "b": nd.zeros(1)})
    assert out["w"].tolist() == [1.0]
    assert out["b"].tolist() == [2.0]
    assert opt.penalty(theta) == 1.0


@pytest.mark.parametrize("gradient, rate", [
    (gradient, rate)
    for gradient in (Gradient.GD(), Gradient.Momentum(0.9), Gradient.Adagrad())
    for rate in (LearningRate.Const(0.1), LearningRate.Adagrad(1.),
                 LearningRate.Decay(0.1, 0.5), LearningRate.ExpDecay(0.1, 0.5))
    if not (isinstance(gradient, Gradient.Adagrad) and isinstance(rate, LearningRate.Adagrad))
])
def test_zero_gradient_leaves_theta_unchanged(gradient, rate):
    opt = Optimiser(Params(gradient=gradient, learning_rate=rate))
    theta = {"t": nd.of_array([1.0, -3.0])}
    for _ in range(3):
        theta = opt.step(theta, {"t": nd.zeros(2)})
    assert theta["t"].tolist() == [1.0, -3.0]


def test_step_shape_mismatch():
    with pytest.raises(ShapeError):
        Optimiser(Params()).step({"t": nd.zeros(2)}, {"t": nd.zeros(3)})


def test_minimize_square_converges():
    params = Params.config(50, learning_rate=LearningRate.Const(0.4))
    result = minimize(params, _square, {"t": nd.of_array([1.0])})
    assert abs(result.theta["t"].tolist()[0]) < 1e-6
    assert result.iterations <= 50


def test_huge_threshold_stops_after_one_iteration():
    params = Params.config(100, stopping=Stopping.ConstThreshold(1e300))
    result = minimize(params, _square, {"t": nd.of_array([1.0])})
    assert result.iterations == 1
    assert result.converged


def test_full_batch_history_non_increasing():
    x, y = _regression_data()
    params = Params.config(200, learning_rate=LearningRate.Const(0.05))
    result = minimize(params, _least_squares, {"w": nd.zeros((3, 1))}, x, y)
    h = result.history
    assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))


def test_divergence_attaches_history():
    params = Params.config(1000, learning_rate=LearningRate.Const(10.0))
    with pytest.raises(DivergenceError) as info:
        minimize(params, _square, {"t": nd.of_array([1.0])})
    assert len(info.value.history) > 1
    assert all(np.isfinite(info.value.history))


@pytest.mark.parametrize("batch, epochs, expected", [
    (Batch.Mini(4), 2.0, 10),
    (Batch.Mini(3), 1.0, 7),
    (Batch.Stochastic(), 1.0, 20),
    (Batch.Stochastic(), 0.5, 10),
    (Batch.Full(), 3.0, 3),
])
def test_epoch_budget(batch, epochs, expected):
    x, y = _regression_data()
    params = Params.config(epochs, batch=batch, stopping=Stopping.ConstThreshold(0.0))
    result = minimize(params, _least_squares, {"w": nd.zeros((3, 1))}, x, y)
    assert result.iterations == expected


def test_mini_batches_are_seeded():
    x, y = _regression_data()
    params = Params.config(3, batch=Batch.Mini(5), learning_rate=LearningRate.Const(0.05),
                           stopping=Stopping.ConstThreshold(0.0))
    first = minimize(params, _least_squares, {"w": nd.zeros((3, 1))}, x, y)
    second = minimize(params, _least_squares, {"w": nd.zeros((3, 1))}, x, y)
    other = minimize(params.with_(seed=7), _least_squares, {"w": nd.zeros((3, 1))}, x, y)
    assert first.history == second.history
    assert nd.equal(first.theta["w"], second.theta["w"])
    assert first.history != other.history


def test_sample_count_mismatch():
    with pytest.raises(ShapeError):
        minimize(Params(), _least_squares, {"w": nd.zeros((3, 1))}, nd.zeros((4, 3)), nd.zeros((5, 1)))
