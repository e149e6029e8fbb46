"""
Demo runs behind the graph, lasso, train-xor and dist-train subcommands.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src import algodiff as ad
from src import broadcast as bc
from src import linalg as la
from src import ndarray as nd
from src import neural, regression
from src.actor import ParamServerEngine, make_parallel_neural
from src.neural import Activation, Network
from src.optimise import Batch, Gradient, LearningRate, Loss, Params, Stopping

logger = logging.getLogger(__name__)

XOR_X = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
XOR_Y = [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]]


def graph_function(x, y):
    """(x * sin(x + x) + 1 * sqrt(x) / 7) * relu(y), summed."""
    return ad.sum((x * ad.sin(x + x) + ad.F(1.0) * ad.sqrt(x) / ad.F(7.0)) * ad.relu(y))


def graph_demo(x_values=(0.5, 1.5), y_values=(1.0, -1.0)) -> str:
    """DOT text of the reverse graph built while differentiating ``graph_function``."""
    x, y = nd.of_array(x_values), nd.of_array(y_values)
    out = ad.trace(graph_function, x, y)
    ad.backprop(out, ad.F(1.0))
    return ad.export_dot(out, "graph_function")


@dataclass
class LassoDemo:
    model: regression.LinearModel
    true_w: np.ndarray
    history: List[float]


def lasso_demo(alpha: float = 0.001, seed: int = 42, n: int = 200, d: int = 20,
               nonzero: int = 3, noise: float = 0.01) -> LassoDemo:
    """Recover a sparse weight vector from noisy linear observations."""
    rng = np.random.default_rng(seed)
    true_w = np.zeros((d, 1))
    true_w[rng.choice(d, nonzero, replace=False), 0] = rng.uniform(1.0, 3.0, nonzero) * rng.choice([-1.0, 1.0], nonzero)
    x = nd.gaussian((n, d), seed)
    y = bc.add(la.matmul(x, nd.from_numpy(true_w)), nd.gaussian((n, 1), seed + 1, sigma=noise))
    model = regression.lasso(x, y, alpha=alpha)
    return LassoDemo(model, true_w, model.history)


def xor_params(epochs: float = 5000.) -> Params:
    return Params.config(
        epochs,
        batch=Batch.Full(),
        loss=Loss.CROSS_ENTROPY,
        gradient=Gradient.GD(),
        learning_rate=LearningRate.Const(0.5),
        stopping=Stopping.ConstThreshold(1e-16),
    )


def xor_demo(seed: int = 0, epochs: float = 5000.) -> Network:
    net = neural.input(2, seed=seed).linear(4, Activation.TANH).linear(2, Activation.SOFTMAX)
    net.train(xor_params(epochs), nd.of_array(XOR_X), nd.of_array(XOR_Y))
    return net


def dist_train_data(samples: int = 64, seed: int = 42):
    """Two gaussian features, labelled by the sign of their sum as one-hot rows."""
    x = nd.gaussian((samples, 2), seed)
    positive = x.numpy().sum(axis=1) > 0
    y = np.stack([~positive, positive], axis=1).astype(np.float64)
    return x, nd.from_numpy(y)


def dist_train_demo(workers: int = 4, seed: int = 42, samples: int = 64, epochs: float = 200.,
                    engine: Optional[str] = 'ps') -> Network:
    """Full-batch training of a 2-8-2 network, optionally through a parameter server."""
    x, y = dist_train_data(samples, seed)
    net = neural.input(2, seed=seed).linear(8, Activation.TANH).linear(2, Activation.SOFTMAX)
    params = xor_params(epochs)
    if engine == 'ps':
        with ParamServerEngine(workers) as server:
            make_parallel_neural(neural, server).train(net, params, x, y)
    else:
        net.train(params, x, y)
    logger.info("dist-train finished: %d iterations, accuracy %.3f", len(net.history), net.accuracy(x, y))
    return net
