"""Configurable gradient-based minimisation.

An optimisation is described by a frozen ``Params`` record whose fields pick
one variant on each axis (batching, loss, gradient method, learning rate,
regularisation, stopping rule) plus an epoch budget. ``minimize`` drives the
loop; each iteration is one *round* of a runner, so the same loop serves
local training and parameter-server training.

Update rule per parameter tensor:

1. L2 adds 2*alpha*theta to g,
2. the gradient method turns g into a direction d,
3. the learning-rate schedule gives a scalar or elementwise rate,
4. theta <- theta + rate * d,
5. L1 soft-thresholds the result by rate*alpha: coordinates within
   rate*alpha of zero land exactly on 0, so the penalty never pushes a
   coordinate past zero.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from . import algodiff as ad
from . import broadcast as bc
from . import ndarray as nd
from .errors import DivergenceError, ShapeError
from .ndarray import Ndarray
from .slicing import IndexList, get_fancy

logger = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-8
CLAMP_MIN = 1e-12

Theta = Dict[str, Ndarray]


class Batch:
    @dataclass(frozen=True)
    class Full:
        pass

    @dataclass(frozen=True)
    class Mini:
        size: int

    @dataclass(frozen=True)
    class Stochastic:
        pass


class Loss(Enum):
    QUADRATIC = "quadratic"
    CROSS_ENTROPY = "cross_entropy"
    HINGE = "hinge"


class Gradient:
    @dataclass(frozen=True)
    class GD:
        pass

    @dataclass(frozen=True)
    class Momentum:
        coef: float

    @dataclass(frozen=True)
    class Adagrad:
        """d = -g / (sqrt(G) + eps) with G the running sum of g*g.

        Pair it with a Const or decaying rate; ``LearningRate.Adagrad`` already
        normalises by the same accumulator, so ``Params`` rejects the pair.
        """


class LearningRate:
    @dataclass(frozen=True)
    class Const:
        eta: float

    @dataclass(frozen=True)
    class Adagrad:
        base: float

    @dataclass(frozen=True)
    class Decay:
        base: float
        rate: float

    @dataclass(frozen=True)
    class ExpDecay:
        base: float
        rate: float


class Regularisation:
    @dataclass(frozen=True)
    class NoneReg:
        pass

    @dataclass(frozen=True)
    class L1norm:
        alpha: float

    @dataclass(frozen=True)
    class L2norm:
        alpha: float


class Stopping:
    @dataclass(frozen=True)
    class ConstThreshold:
        eps: float


@dataclass(frozen=True)
class Params:
    batch: object = Batch.Full()
    loss: Loss = Loss.QUADRATIC
    gradient: object = Gradient.GD()
    learning_rate: object = LearningRate.Const(0.01)
    regularisation: object = Regularisation.NoneReg()
    stopping: object = Stopping.ConstThreshold(1e-16)
    epochs: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if not self.epochs > 0:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if isinstance(self.batch, Batch.Mini) and self.batch.size < 1:
            raise ValueError(f"Mini batch size must be >= 1, got {self.batch.size}")
        alpha = getattr(self.regularisation, "alpha", 0.0)
        if alpha < 0:
            raise ValueError(f"Regularisation strength must be >= 0, got {alpha}")
        if self.stopping.eps < 0:
            raise ValueError(f"Stopping threshold must be >= 0, got {self.stopping.eps}")
        if isinstance(self.gradient, Gradient.Momentum) and not 0 <= self.gradient.coef < 1:
            raise ValueError(f"Momentum coefficient must be in [0, 1), got {self.gradient.coef}")
        if isinstance(self.gradient, Gradient.Adagrad) and isinstance(self.learning_rate, LearningRate.Adagrad):
            raise ValueError("Gradient.Adagrad with LearningRate.Adagrad would normalise the step twice")

    @classmethod
    def config(cls, epochs: float, **kwargs) -> "Params":
        """``Params.config(1000., batch=Batch.Full(), ...)``; unnamed axes keep their defaults."""
        return cls(epochs=float(epochs), **kwargs)

    def with_(self, **changes) -> "Params":
        return Params(**{**self.__dict__, **changes})


@dataclass
class OptimState:
    iteration: int = 0
    velocity: Dict[str, Ndarray] = field(default_factory=dict)
    grad_acc: Dict[str, Ndarray] = field(default_factory=dict)
    rate_acc: Dict[str, Ndarray] = field(default_factory=dict)
    history: List[float] = field(default_factory=list)


def _sign(x: Ndarray) -> Ndarray:
    return bc.sub(bc.elt_gt_scalar(x, 0.0), bc.elt_lt_scalar(x, 0.0))


def _soft_threshold(z: Ndarray, t: Union[float, Ndarray]) -> Ndarray:
    """sign(z) * max(|z| - t, 0) elementwise; ``t`` is a scalar or has z's shape."""
    shrunk = bc.sub(nd.abs(z), t) if isinstance(t, Ndarray) else bc.sub_scalar(nd.abs(z), t)
    return bc.mul(_sign(z), nd.relu(shrunk))


class Optimiser:
    """Applies ``Params`` update rules and holds the accumulators between steps."""

    def __init__(self, params: Params, unregularised: Sequence[str] = ()):
        self.params = params
        self.unregularised = frozenset(unregularised)
        self.state = OptimState()

    def _regularised(self, name: str) -> bool:
        return name not in self.unregularised

    def penalty(self, theta: Theta) -> float:
        reg = self.params.regularisation
        if isinstance(reg, Regularisation.NoneReg):
            return 0.0
        total = 0.0
        for name, value in theta.items():
            if not self._regularised(name):
                continue
            if isinstance(reg, Regularisation.L1norm):
                total += reg.alpha * nd.sum(nd.abs(value))
            else:
                total += reg.alpha * nd.sum(nd.sqr(value))
        return total

    def _with_regularisation(self, name: str, theta: Ndarray, g: Ndarray) -> Ndarray:
        reg = self.params.regularisation
        if isinstance(reg, Regularisation.L2norm) and self._regularised(name):
            return bc.add(g, bc.mul_scalar(theta, 2.0 * reg.alpha))
        return g

    def _shrink(self, name: str, z: Ndarray, rate: Union[float, Ndarray]) -> Ndarray:
        reg = self.params.regularisation
        if not isinstance(reg, Regularisation.L1norm) or not self._regularised(name):
            return z
        if isinstance(rate, Ndarray):
            return _soft_threshold(z, bc.mul_scalar(rate, reg.alpha))
        return _soft_threshold(z, rate * reg.alpha)

    def _direction(self, name: str, g: Ndarray) -> Ndarray:
        method = self.params.gradient
        if isinstance(method, Gradient.GD):
            return nd.neg(g)
        if isinstance(method, Gradient.Momentum):
            v = self.state.velocity.get(name)
            v = nd.neg(g) if v is None else bc.sub(bc.mul_scalar(v, method.coef), g)
            self.state.velocity[name] = v
            return v
        acc = self.state.grad_acc.get(name)
        acc = nd.sqr(g) if acc is None else bc.add(acc, nd.sqr(g))
        self.state.grad_acc[name] = acc
        return bc.div(nd.neg(g), bc.add_scalar(nd.sqrt(acc), ADAGRAD_EPS))

    def _rate(self, name: str, g: Ndarray) -> Union[float, Ndarray]:
        lr = self.params.learning_rate
        k = self.state.iteration
        if isinstance(lr, LearningRate.Const):
            return lr.eta
        if isinstance(lr, LearningRate.Decay):
            return lr.base / (1.0 + lr.rate * k)
        if isinstance(lr, LearningRate.ExpDecay):
            return lr.base * math.exp(-lr.rate * k)
        acc = self.state.rate_acc.get(name)
        acc = nd.sqr(g) if acc is None else bc.add(acc, nd.sqr(g))
        self.state.rate_acc[name] = acc
        return bc.scalar_div(lr.base, bc.add_scalar(nd.sqrt(acc), ADAGRAD_EPS))

    def step(self, theta: Theta, grads: Theta) -> Theta:
        """One update of every parameter; returns the new parameter set."""
        updated = {}
        for name, value in theta.items():
            g = grads[name]
            if g.shape != value.shape:
                raise ShapeError(f"Gradient for {name} has shape {g.shape}, parameter {value.shape}")
            g = self._with_regularisation(name, value, g)
            d = self._direction(name, g)
            rate = self._rate(name, g)
            if isinstance(rate, Ndarray):
                z = bc.add(value, bc.mul(rate, d))
            else:
                z = bc.add(value, bc.mul_scalar(d, rate))
            updated[name] = self._shrink(name, z, rate)
        self.state.iteration += 1
        return updated


def loss_eval(loss: Loss, prediction, target) -> ad.AdValue:
    """Mean-over-samples loss as a differentiable scalar."""
    p, t = ad.lift(prediction), ad.lift(target)
    if p.shape != t.shape:
        raise ShapeError(f"Prediction {p.shape} and target {t.shape} differ")
    n = p.shape[0] if p.shape is not None else 1
    if loss is Loss.QUADRATIC:
        d = ad.sub(p, t)
        return ad.mul(ad.sum(ad.mul(d, d)), ad.F(0.5 / n))
    if loss is Loss.CROSS_ENTROPY:
        clamped = ad.max2(p, ad.F(CLAMP_MIN))
        return ad.mul(ad.sum(ad.mul(t, ad.log(clamped))), ad.F(-1.0 / n))
    if loss is Loss.HINGE:
        return ad.mul(ad.sum(ad.relu(ad.sub(ad.F(1.0), ad.mul(t, p)))), ad.F(1.0 / n))
    raise ValueError(f"Unknown loss {loss!r}")


def as_float(v) -> float:
    if isinstance(v, Ndarray):
        if v.size != 1:
            raise ShapeError(f"Expected a scalar, got shape {v.shape}")
        return float(v.data[0])
    return float(v)


Objective = Callable[[Dict[str, ad.AdValue], Optional[Ndarray], Optional[Ndarray]], ad.AdValue]


class Runner(Protocol):
    def round(self, objective: Objective, theta: Theta, xb: Optional[Ndarray], yb: Optional[Ndarray],
              optimiser: Optimiser) -> Tuple[float, Theta]:
        ...


class LocalRunner:
    """Gradient of the whole batch in this process, then one optimiser step."""

    def round(self, objective, theta, xb, yb, optimiser):
        value, grads = ad.grad_params(lambda th: objective(th, xb, yb), theta)
        return as_float(value), optimiser.step(theta, grads)


@dataclass
class MinimizeResult:
    theta: Theta
    history: List[float]
    iterations: int
    converged: bool


def _iterations_per_epoch(batch, n: int) -> int:
    if isinstance(batch, Batch.Full):
        return 1
    if isinstance(batch, Batch.Mini):
        return math.ceil(n / batch.size)
    return n


def _batches(params: Params, x: Optional[Ndarray], y: Optional[Ndarray]):
    """Endless stream of (xb, yb); one shuffle per epoch for Mini and Stochastic."""
    if x is None or isinstance(params.batch, Batch.Full):
        while True:
            yield x, y
    n = x.shape[0]
    size = params.batch.size if isinstance(params.batch, Batch.Mini) else 1
    rng = np.random.default_rng(params.seed)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, size):
            rows = IndexList(perm[start:start + size].tolist())
            yield get_fancy([rows], x), (get_fancy([rows], y) if y is not None else None)


def minimize(params: Params, objective: Objective, theta0: Theta,
             x: Optional[Ndarray] = None, y: Optional[Ndarray] = None, *,
             unregularised: Sequence[str] = (), runner: Optional[Runner] = None) -> MinimizeResult:
    """Iterate rounds until the loss change drops below the threshold or the epoch budget runs out.

    The recorded loss includes the regularisation penalty. The first change
    is measured against 0, so an enormous threshold stops after one round.
    """
    if x is not None and y is not None and x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} samples, y has {y.shape[0]}")
    n = x.shape[0] if x is not None else 1
    budget = max(1, math.ceil(params.epochs * _iterations_per_epoch(params.batch, n)))
    optimiser = Optimiser(params, unregularised)
    runner = runner or LocalRunner()
    eps = params.stopping.eps

    theta = dict(theta0)
    history: List[float] = []
    prev, converged = 0.0, False
    stream = _batches(params, x, y)
    for _ in range(budget):
        xb, yb = next(stream)
        penalty = optimiser.penalty(theta)
        loss, theta = runner.round(objective, theta, xb, yb, optimiser)
        total = loss + penalty
        if not math.isfinite(total):
            raise DivergenceError(f"Loss became {total} at iteration {len(history)}", history)
        history.append(total)
        if abs(total - prev) < eps:
            converged = True
            break
        prev = total

    optimiser.state.history = history
    logger.debug("minimize: %d iterations, final loss %.6g, converged=%s",
                 len(history), history[-1], converged)
    return MinimizeResult(theta, history, len(history), converged)
