"""Linear regression models as configurations of ``optimise.minimize``.

Every model minimises ``loss(x.w + b, y) + penalty(w)`` where the loss is
averaged over samples. The bias is never regularised. With the quadratic
loss ``J = 1/(2n) |Xw - y|^2 + alpha |w|^2`` the ridge minimiser is
``(X^T X + 2 n alpha I)^-1 X^T y``.

The defaults mirror the classic configuration: full batch, gradient descent
directions scaled by an Adagrad(1.0) learning rate, a 1e-16 loss-change
threshold and a budget of 1000 epochs.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

from . import algodiff as ad
from . import broadcast as bc
from . import linalg as la
from . import ndarray as nd
from .errors import ShapeError
from .ndarray import Ndarray
from .optimise import (Batch, Gradient, LearningRate, Loss, Params, Regularisation,
                       Stopping, loss_eval, minimize)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.001


def default_params(**changes) -> Params:
    base = Params.config(
        1000.,
        batch=Batch.Full(),
        loss=Loss.QUADRATIC,
        gradient=Gradient.GD(),
        learning_rate=LearningRate.Adagrad(1.),
        regularisation=Regularisation.NoneReg(),
        stopping=Stopping.ConstThreshold(1e-16),
    )
    return base.with_(**changes) if changes else base


@dataclass
class LinearModel:
    w: Ndarray
    b: Ndarray
    intercept: bool = False
    history: List[float] = field(default_factory=list)


def _as_targets(x: Ndarray, y: Ndarray) -> Ndarray:
    if x.rank != 2:
        raise ShapeError(f"Features must be a matrix [n;d], got {x.shape}")
    if y.rank == 1:
        y = nd.reshape(y, (y.shape[0], 1))
    if y.rank != 2 or y.shape[0] != x.shape[0]:
        raise ShapeError(f"Targets {y.shape} do not match {x.shape[0]} samples")
    return y


def _linear_reg(intercept: bool, params: Params, x: Ndarray, y: Ndarray) -> LinearModel:
    """Fit w (and b when ``intercept``) by minimising ``params.loss`` plus the configured penalty."""
    y = _as_targets(x, y)
    d, k = x.shape[1], y.shape[1]
    theta0 = {"w": nd.zeros((d, k), x.kind)}
    if intercept:
        theta0["b"] = nd.zeros((k,), x.kind)

    def objective(th, xb, yb):
        pred = ad.matmul(xb, th["w"])
        if intercept:
            pred = ad.add(pred, th["b"])
        return loss_eval(params.loss, pred, yb)

    result = minimize(params, objective, theta0, x, y, unregularised=("b",))
    logger.info("Linear model fitted in %d iterations (loss %.6g)", result.iterations, result.history[-1])
    b = result.theta.get("b", nd.zeros((k,), x.kind))
    return LinearModel(result.theta["w"], b, intercept, result.history)


def _configure(params: Optional[Params], **forced) -> Params:
    return (params or default_params()).with_(**forced)


def ols(x: Ndarray, y: Ndarray, intercept: bool = False, params: Optional[Params] = None) -> LinearModel:
    return _linear_reg(intercept, _configure(params, regularisation=Regularisation.NoneReg()), x, y)


def ridge(x: Ndarray, y: Ndarray, alpha: float = DEFAULT_ALPHA, intercept: bool = False,
          params: Optional[Params] = None) -> LinearModel:
    return _linear_reg(intercept, _configure(params, regularisation=Regularisation.L2norm(alpha)), x, y)


def lasso(x: Ndarray, y: Ndarray, alpha: float = DEFAULT_ALPHA, intercept: bool = False,
          params: Optional[Params] = None) -> LinearModel:
    """L1-penalised least squares; weak coefficients are thresholded to exactly zero."""
    return _linear_reg(intercept, _configure(params, regularisation=Regularisation.L1norm(alpha)), x, y)


def svm(x: Ndarray, y: Ndarray, alpha: float = DEFAULT_ALPHA, intercept: bool = False,
        params: Optional[Params] = None) -> LinearModel:
    """Linear SVM: hinge loss with an L2 penalty; labels must be -1 or 1."""
    labels = set(y.data.tolist())
    if not labels <= {-1.0, 1.0}:
        raise ValueError(f"svm labels must be -1 or 1, got {sorted(labels)}")
    forced = dict(loss=Loss.HINGE, regularisation=Regularisation.L2norm(alpha))
    return _linear_reg(intercept, _configure(params, **forced), x, y)


def predict(model: LinearModel, x: Ndarray) -> Ndarray:
    if x.rank != 2 or x.shape[1] != model.w.shape[0]:
        raise ShapeError(f"Features {x.shape} do not match weights {model.w.shape}")
    out = la.matmul(x, model.w)
    return bc.add(out, model.b) if model.intercept else out


def accuracy(model: LinearModel, x: Ndarray, y: Ndarray) -> float:
    """Fraction of samples whose predicted sign matches the +-1 label."""
    y = _as_targets(x, y)
    pred = predict(model, x)
    hits = bc.elt_gt_scalar(bc.mul(pred, y), 0.0)
    return nd.mean(hits)
