"""Tests for feedforward networks and their training."""

import numpy as np
import pytest

from src import algodiff as ad
from src import ndarray as nd
from src import neural
from src.errors import ShapeError
from src.neural import Activation, Input, Linear
from src.optimise import Batch, LearningRate, Loss, Params, loss_eval

XOR_X = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
XOR_Y = [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]]


def _xor_params(epochs=5000, rate=0.5):
    return Params.config(epochs, batch=Batch.Full(), loss=Loss.CROSS_ENTROPY,
                         learning_rate=LearningRate.Const(rate))


def test_parameter_count_of_digit_network():
    net = neural.input(784).linear(300, Activation.TANH).linear(100, Activation.SOFTMAX)
    assert net.param_count() == 784 * 300 + 300 + 300 * 100 + 100 == 265_600
    assert repr(net) == "Network(input [784] |> linear 300 tanh |> linear 100 softmax)"


def test_build_network_from_layer_list():
    net = neural.build_network([Input((2,)), Linear(4, Activation.TANH), Linear(2, Activation.SOFTMAX)])
    assert net.params["w0"].shape == (2, 4)
    assert net.params["b1"].shape == (2,)
    assert net.bias_names() == ["b0", "b1"]
    with pytest.raises(ShapeError):
        neural.build_network([Linear(3)])
    with pytest.raises(ShapeError):
        neural.build_network([Input((2,)), Input((3,))])


def test_xavier_bounds_and_seed():
    a = neural.input(10, seed=3).linear(20)
    b = neural.input(10, seed=3).linear(20)
    limit = np.sqrt(6.0 / 30.0)
    assert np.all(np.abs(a.params["w0"].numpy()) <= limit)
    assert nd.equal(a.params["w0"], b.params["w0"])


def test_zero_initialised_forward_is_zero(rng):
    net = neural.input(3, init="zeros").linear(5).linear(2)
    out = neural.forward(net, nd.from_numpy(rng.normal(size=(4, 3)))).value
    assert out.shape == (4, 2)
    assert nd.sum(nd.abs(out)) == 0.0


def test_softmax_output_rows(rng):
    net = neural.input(3, seed=1).linear(6, Activation.RELU).linear(4, Activation.SOFTMAX)
    out = net.predict(nd.from_numpy(rng.normal(size=(5, 3)))).numpy()
    assert np.all(out > 0)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_forward_rejects_wrong_width():
    net = neural.input(3).linear(2)
    with pytest.raises(ShapeError):
        net.forward(nd.zeros((4, 2)))


def test_softmax_cross_entropy_output_gradient(rng):
    z = nd.from_numpy(rng.normal(size=(5, 3)))
    t = nd.from_numpy(np.eye(3)[rng.integers(0, 3, size=5)])
    g = ad.grad(lambda v: loss_eval(Loss.CROSS_ENTROPY, ad.softmax(v), t), z)
    p = ad.softmax(z).value.numpy()
    assert np.allclose(g.numpy(), (p - t.numpy()) / 5, atol=1e-12)


def test_network_gradient_matches_finite_differences(rng):
    net = neural.input(2, seed=5).linear(3, Activation.TANH).linear(2, Activation.SOFTMAX)
    x = nd.from_numpy(rng.normal(size=(5, 2)))
    y = nd.from_numpy(np.eye(2)[rng.integers(0, 2, size=5)])

    def loss(th):
        return net.loss(th, x, y, Loss.CROSS_ENTROPY)

    _, grads = ad.grad_params(loss, net.params)
    h = 1e-6
    for name, value in net.params.items():
        base = value.numpy()
        numeric = np.zeros(base.size)
        for i in range(base.size):
            plus, minus = base.copy().ravel(), base.copy().ravel()
            plus[i] += h
            minus[i] -= h
            lo = {**net.params, name: nd.from_numpy(minus.reshape(base.shape))}
            hi = {**net.params, name: nd.from_numpy(plus.reshape(base.shape))}
            numeric[i] = (float(loss(hi).value) - float(loss(lo).value)) / (2 * h)
        assert np.allclose(grads[name].numpy().ravel(), numeric, rtol=1e-5, atol=1e-9), name


def test_zero_learning_rate_keeps_parameters():
    net = neural.input(2, seed=0).linear(4, Activation.TANH).linear(2, Activation.SOFTMAX)
    before = {k: v.copy() for k, v in net.params.items()}
    net.train(_xor_params(epochs=1, rate=0.0), nd.of_array(XOR_X), nd.of_array(XOR_Y))
    for name, value in before.items():
        assert nd.equal(net.params[name], value)
    assert len(net.history) == 1


def test_xor_is_learned():
    net = neural.input(2, seed=0).linear(4, Activation.TANH).linear(2, Activation.SOFTMAX)
    x, y = nd.of_array(XOR_X), nd.of_array(XOR_Y)
    net, history = neural.train(net, _xor_params(), x, y)
    assert len(history) <= 5000
    assert history[-1] < history[0]
    assert net.accuracy(x, y) == 1.0


def test_train_rejects_bad_targets():
    net = neural.input(2).linear(2, Activation.SOFTMAX)
    with pytest.raises(ShapeError):
        net.train(_xor_params(epochs=1), nd.of_array(XOR_X), nd.zeros((4, 3)))
