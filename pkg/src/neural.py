"""Feedforward neural networks built on algodiff and trained by ``minimize``.

    net = input((784,)).linear(300, Activation.TANH).linear(100, Activation.SOFTMAX)

Each ``Linear`` layer i owns parameters ``w{i}`` [in;out] and ``b{i}`` [out].
Weights start Xavier-uniform in +-sqrt(6 / (fan_in + fan_out)) from a seeded
generator; biases start at zero and are not regularised.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import algodiff as ad
from . import ndarray as nd
from .errors import ShapeError
from .ndarray import Kind, Ndarray
from .optimise import Loss, MinimizeResult, Params, Runner, loss_eval, minimize

logger = logging.getLogger(__name__)


class Activation(Enum):
    TANH = "tanh"
    SOFTMAX = "softmax"
    RELU = "relu"
    SIGMOID = "sigmoid"
    NONE = "none"


@dataclass(frozen=True)
class Input:
    shape: Tuple[int, ...]


@dataclass(frozen=True)
class Linear:
    out_dim: int
    activation: Activation = Activation.NONE


Layer = Union[Input, Linear]

_ACTIVATIONS = {
    Activation.TANH: ad.tanh,
    Activation.SOFTMAX: ad.softmax,
    Activation.RELU: ad.relu,
    Activation.SIGMOID: ad.sigmoid,
    Activation.NONE: lambda h: h,
}


class Network:
    """Ordered layers plus their parameter set."""

    def __init__(self, seed: int = 42, kind: Kind = Kind.F64, init: str = "xavier"):
        if init not in ("xavier", "zeros"):
            raise ValueError("init must be 'xavier' or 'zeros'")
        self.seed = seed
        self.kind = Kind(kind)
        self.init = init
        self.layers: List[Layer] = []
        self.params: Dict[str, Ndarray] = {}
        self.history: List[float] = []

    # -- building -----------------------------------------------------------

    @property
    def out_dim(self) -> int:
        if not self.layers:
            raise ShapeError("Network has no input layer")
        last = self.layers[-1]
        return last.out_dim if isinstance(last, Linear) else last.shape[-1]

    @property
    def n_linear(self) -> int:
        return sum(isinstance(layer, Linear) for layer in self.layers)

    def input(self, shape) -> "Network":
        if self.layers:
            raise ShapeError("Input must be the first layer")
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        if len(shape) != 1 or shape[0] < 1:
            raise ShapeError(f"Input shape must be a single positive dimension, got {shape}")
        self.layers.append(Input(shape))
        return self

    def linear(self, out_dim: int, activation: Activation = Activation.NONE) -> "Network":
        if out_dim < 1:
            raise ShapeError(f"Layer width must be positive, got {out_dim}")
        fan_in, i = self.out_dim, self.n_linear
        self.layers.append(Linear(out_dim, Activation(activation)))
        if self.init == "zeros":
            w = nd.zeros((fan_in, out_dim), self.kind)
        else:
            limit = math.sqrt(6.0 / (fan_in + out_dim))
            w = nd.uniform((fan_in, out_dim), self.seed + i, self.kind, -limit, limit)
        self.params[f"w{i}"] = w
        self.params[f"b{i}"] = nd.zeros((out_dim,), self.kind)
        return self

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def bias_names(self) -> List[str]:
        return [name for name in self.params if name.startswith("b")]

    # -- running ------------------------------------------------------------

    def forward(self, x, params: Optional[Dict] = None) -> ad.AdValue:
        """Compose affine maps and activations with differentiable operations."""
        params = self.params if params is None else params
        h = ad.lift(x)
        if h.shape is None or len(h.shape) != 2 or h.shape[1] != self.layers[0].shape[0]:
            raise ShapeError(f"Input of shape {h.shape} does not fit {self.layers[0]}")
        i = 0
        for layer in self.layers[1:]:
            h = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
            h = _ACTIVATIONS[layer.activation](h)
            i += 1
        return h

    def loss(self, params: Dict, x, y, loss: Loss) -> ad.AdValue:
        return loss_eval(loss, self.forward(x, params), y)

    def predict(self, x: Ndarray) -> Ndarray:
        return self.forward(x).value

    def accuracy(self, x: Ndarray, y: Ndarray) -> float:
        """Share of rows whose arg-max prediction matches the arg-max of ``y``."""
        pred = self.predict(x).numpy()
        return float(np.mean(np.argmax(pred, axis=1) == np.argmax(y.numpy(), axis=1)))

    def train(self, params: Params, x: Ndarray, y: Ndarray,
              runner: Optional[Runner] = None) -> MinimizeResult:
        if not self.layers or not isinstance(self.layers[0], Input):
            raise ShapeError("Network needs an input layer")
        if y.rank != 2 or y.shape != (x.shape[0], self.out_dim):
            raise ShapeError(f"Targets {y.shape} do not match output [{x.shape[0]};{self.out_dim}]")

        def objective(th, xb, yb):
            return self.loss(th, xb, yb, params.loss)

        result = minimize(params, objective, self.params, x, y,
                          unregularised=self.bias_names(), runner=runner)
        self.params = result.theta
        self.history = result.history
        logger.info("Network trained for %d iterations, final loss %.6g",
                    result.iterations, result.history[-1])
        return result

    def __repr__(self):
        return "Network(" + " |> ".join(_describe(layer) for layer in self.layers) + ")"


def _describe(layer: Layer) -> str:
    if isinstance(layer, Input):
        return f"input {list(layer.shape)}"
    return f"linear {layer.out_dim} {layer.activation.value}"


def input(shape, seed: int = 42, kind: Kind = Kind.F64, init: str = "xavier") -> Network:
    """Start a network: ``input(784).linear(300, Activation.TANH)``."""
    return Network(seed, kind, init).input(shape)


def build_network(layers: Sequence[Layer], seed: int = 42, kind: Kind = Kind.F64,
                  init: str = "xavier") -> Network:
    layers = list(layers)
    if not layers or not isinstance(layers[0], Input):
        raise ShapeError("The first layer must be Input")
    net = Network(seed, kind, init).input(layers[0].shape)
    for layer in layers[1:]:
        if not isinstance(layer, Linear):
            raise ShapeError(f"Only Linear layers may follow the input, got {layer!r}")
        net.linear(layer.out_dim, layer.activation)
    return net


def forward(net: Network, x) -> ad.AdValue:
    return net.forward(x)


def train(net: Network, params: Params, x: Ndarray, y: Ndarray,
          runner: Optional[Runner] = None) -> Tuple[Network, List[float]]:
    result = net.train(params, x, y, runner)
    return net, result.history
