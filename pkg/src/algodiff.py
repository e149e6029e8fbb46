"""Nested forward- and reverse-mode algorithmic differentiation.

A value is one of

* ``Const(payload)``: a float or an Ndarray with no perturbation attached;
* ``Forward(primal, tangent, tag)``: a dual number at nesting level ``tag``;
* ``Reverse(primal, tag, parents, op_name)``: a node of a dynamically built
  graph whose adjoint is filled in by the backward sweep.

Every derivative operator (``diff``, ``grad`` ...) allocates a fresh tag, so
perturbations of different invocations never get confused. When an operation
sees arguments of different tags, the highest tag is active and the others
are treated as constants at that level. Derivative rules are themselves
written with the differentiable operations below, which is what makes
derivatives of derivatives (and forward-over-reverse Hessians) work.

Broadcasting is supported inside differentiated code: forward tangents are
expanded to the output shape and adjoints are summed back over stretched
dimensions.
"""

import itertools
import logging
import threading
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from . import broadcast as bc
from . import linalg as la
from . import ndarray as nd
from .errors import DifferentiationError, ShapeError
from .ndarray import Kind, Ndarray

logger = logging.getLogger(__name__)

Payload = Union[float, Ndarray]

_counter_lock = threading.Lock()
_tags = itertools.count(1)
_ids = itertools.count(0)


def _next_tag() -> int:
    with _counter_lock:
        return next(_tags)


def _next_id() -> int:
    with _counter_lock:
        return next(_ids)


# ---------------------------------------------------------------------------
# payload helpers (float | Ndarray)
# ---------------------------------------------------------------------------

def _shape(p: Payload) -> Optional[Tuple[int, ...]]:
    return p.shape if isinstance(p, Ndarray) else None


def _kind(p: Payload) -> Kind:
    return p.kind if isinstance(p, Ndarray) else Kind.F64


def _pbin(name: str, a: Payload, b: Payload) -> Payload:
    if isinstance(a, Ndarray):
        return bc.binop(name, a, b) if isinstance(b, Ndarray) else bc.binop_scalar(name, a, b)
    if isinstance(b, Ndarray):
        return bc.scalar_binop(name, a, b)
    with np.errstate(all="ignore"):
        return float(bc.BINARY_KERNELS[name](np.float64(a), np.float64(b)))


def _punary(name: str, p: Payload) -> Payload:
    op = nd.UNARY_OPS[name][0]
    if isinstance(p, Ndarray):
        return op(p)
    return float(op(nd.create((1,), p)).data[0])


def _psum_to(p: Payload, shape) -> Payload:
    if shape is None:
        return float(nd.sum(p)) if isinstance(p, Ndarray) else p
    if not isinstance(p, Ndarray):
        return nd.create(shape, p)
    return bc.sum_to(p, shape)


def _pbroadcast(p: Payload, shape, kind: Kind) -> Payload:
    if shape is None:
        if isinstance(p, Ndarray):
            raise ShapeError(f"Cannot broadcast {p.shape} to a scalar")
        return p
    if isinstance(p, Ndarray):
        return bc.broadcast_to(p, shape)
    return nd.create(shape, p, kind)


def _pgt_zero(p: Payload) -> Payload:
    if isinstance(p, Ndarray):
        return bc.elt_gt_scalar(p, 0.0)
    return 1.0 if p > 0.0 else 0.0


def _pge(a: Payload, b: Payload) -> Payload:
    if isinstance(a, Ndarray) and isinstance(b, Ndarray):
        return bc.elt_ge(a, b)
    if isinstance(a, Ndarray):
        return bc.elt_ge_scalar(a, b)
    if isinstance(b, Ndarray):
        return bc.elt_le_scalar(b, a)
    return 1.0 if a >= b else 0.0


def _pzero(p: Payload) -> Payload:
    return nd.zeros(p.shape, p.kind) if isinstance(p, Ndarray) else 0.0


# ---------------------------------------------------------------------------
# values
# ---------------------------------------------------------------------------

class AdValue:
    """Common base; provides operator overloading."""

    __slots__ = ()
    tag = 0

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, other):
        return pow(self, other)

    def __rpow__(self, other):
        return pow(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return neg(self)

    @property
    def value(self) -> Payload:
        """The innermost payload, all perturbations stripped."""
        v = self
        while not isinstance(v, Const):
            v = v.primal
        return v.payload

    @property
    def shape(self):
        return _shape(self.value)


class Const(AdValue):
    __slots__ = ("payload",)

    def __init__(self, payload: Payload):
        if isinstance(payload, (int, float, np.integer, np.floating)):
            payload = float(payload)
        elif not isinstance(payload, Ndarray):
            raise TypeError(f"Cannot differentiate through {type(payload).__name__}")
        self.payload = payload

    def __repr__(self):
        return f"Const({self.payload!r})"


class Forward(AdValue):
    __slots__ = ("primal", "tangent", "tag")

    def __init__(self, primal: AdValue, tangent: AdValue, tag: int):
        self.primal = primal
        self.tangent = tangent
        self.tag = tag

    def __repr__(self):
        return f"Forward(tag={self.tag}, primal={self.primal!r}, tangent={self.tangent!r})"


class Reverse(AdValue):
    __slots__ = ("primal", "tag", "parents", "op_name", "id", "adjoint")

    def __init__(self, primal: AdValue, tag: int,
                 parents: List[Tuple["Reverse", Callable[[AdValue], AdValue]]] = (),
                 op_name: str = "input"):
        self.primal = primal
        self.tag = tag
        self.parents = list(parents)
        self.op_name = op_name
        self.id = _next_id()
        self.adjoint: Optional[AdValue] = None  # None is zero

    def __repr__(self):
        return f"Reverse(#{self.id} {self.op_name}, tag={self.tag})"


def lift(x) -> AdValue:
    return x if isinstance(x, AdValue) else Const(x)


def F(c: float) -> Const:
    """Embed a float constant."""
    return Const(float(c))


def _expand(t: AdValue, c: AdValue) -> AdValue:
    target = c.shape
    if t.shape != target:
        return broadcast_to(t, target, _kind(c.value))
    return t


# ---------------------------------------------------------------------------
# operation machinery
# ---------------------------------------------------------------------------

class _Unary:
    """Differentiable one-argument operation.

    ``forward(p, *static)`` computes the payload, ``tangent(t, a, c, *static)``
    pushes a tangent through and ``adjoint(adj, a, c, *static)`` pulls an
    adjoint back; ``a`` and ``c`` are the argument and result one level down.
    """

    def __init__(self, name, forward, tangent, adjoint):
        self.name = name
        self.forward = forward
        self.tangent = tangent
        self.adjoint = adjoint

    def __call__(self, a, *static):
        a = lift(a)
        if isinstance(a, Const):
            return Const(self.forward(a.payload, *static))
        ap = a.primal
        c = self(ap, *static)
        if isinstance(a, Forward):
            return Forward(c, self.tangent(a.tangent, ap, c, *static), a.tag)
        return Reverse(c, a.tag, [(a, lambda adj: self.adjoint(adj, ap, c, *static))], self.name)


def _elementwise_unary(name, forward, derivative):
    """Unary op whose local derivative is ``derivative(a, c)``."""
    return _Unary(name, forward,
                  lambda t, a, c: mul(t, derivative(a, c)),
                  lambda adj, a, c: mul(adj, derivative(a, c)))


class _Binary:
    def __init__(self, name, forward, tangent_a, tangent_b, adjoint_a, adjoint_b):
        self.name = name
        self.forward = forward
        self.tangent_a, self.tangent_b = tangent_a, tangent_b
        self.adjoint_a, self.adjoint_b = adjoint_a, adjoint_b

    def __call__(self, a, b):
        a, b = lift(a), lift(b)
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(self.forward(a.payload, b.payload))
        tag = a.tag if a.tag > b.tag else b.tag
        active_a = a.tag == tag and not isinstance(a, Const)
        active_b = b.tag == tag and not isinstance(b, Const)
        if active_a and active_b and type(a) is not type(b):
            raise DifferentiationError(
                f"{self.name}: forward and reverse values share nesting level {tag}")
        ap = a.primal if active_a else a
        bp = b.primal if active_b else b
        c = self(ap, bp)
        mode = type(a) if active_a else type(b)

        if mode is Forward:
            tangent = None
            if active_a:
                tangent = self.tangent_a(a.tangent, ap, bp, c)
            if active_b:
                tb = self.tangent_b(b.tangent, ap, bp, c)
                tangent = tb if tangent is None else add(tangent, tb)
            return Forward(c, _expand(tangent, c), tag)

        parents = []
        if active_a:
            parents.append((a, lambda adj: self.adjoint_a(adj, ap, bp, c)))
        if active_b:
            parents.append((b, lambda adj: self.adjoint_b(adj, ap, bp, c)))
        return Reverse(c, tag, parents, self.name)


def _elementwise_binary(name, da, db):
    """Broadcasting binary op with partials ``da(a, b, c)`` and ``db(a, b, c)``."""
    return _Binary(
        name,
        lambda p, q: _pbin(name, p, q),
        lambda t, a, b, c: mul(t, da(a, b, c)),
        lambda t, a, b, c: mul(t, db(a, b, c)),
        lambda adj, a, b, c: mul(adj, da(a, b, c)),
        lambda adj, a, b, c: mul(adj, db(a, b, c)),
    )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

add = _Binary(
    "add", lambda p, q: _pbin("add", p, q),
    lambda t, a, b, c: t, lambda t, a, b, c: t,
    lambda adj, a, b, c: adj, lambda adj, a, b, c: adj,
)

sub = _Binary(
    "sub", lambda p, q: _pbin("sub", p, q),
    lambda t, a, b, c: t, lambda t, a, b, c: neg(t),
    lambda adj, a, b, c: adj, lambda adj, a, b, c: neg(adj),
)

mul = _Binary(
    "mul", lambda p, q: _pbin("mul", p, q),
    lambda t, a, b, c: mul(t, b), lambda t, a, b, c: mul(a, t),
    lambda adj, a, b, c: mul(adj, b), lambda adj, a, b, c: mul(adj, a),
)

div = _Binary(
    "div", lambda p, q: _pbin("div", p, q),
    lambda t, a, b, c: div(t, b), lambda t, a, b, c: neg(div(mul(t, c), b)),
    lambda adj, a, b, c: div(adj, b), lambda adj, a, b, c: neg(div(mul(adj, c), b)),
)

pow = _elementwise_binary(
    "pow",
    lambda a, b, c: mul(b, pow(a, sub(b, F(1.0)))),
    lambda a, b, c: mul(c, log(a)),
)

max2 = _elementwise_binary(
    "max2",
    lambda a, b, c: Const(_pge(a.value, b.value)),
    lambda a, b, c: Const(_pbin("sub", 1.0, _pge(a.value, b.value))),
)

neg = _Unary("neg", lambda p: _punary("neg", p),
             lambda t, a, c: neg(t), lambda adj, a, c: neg(adj))
sin = _elementwise_unary("sin", lambda p: _punary("sin", p), lambda a, c: cos(a))
cos = _elementwise_unary("cos", lambda p: _punary("cos", p), lambda a, c: neg(sin(a)))
tan = _elementwise_unary("tan", lambda p: _punary("tan", p), lambda a, c: add(F(1.0), mul(c, c)))
sqrt = _elementwise_unary("sqrt", lambda p: _punary("sqrt", p), lambda a, c: div(F(0.5), c))
exp = _elementwise_unary("exp", lambda p: _punary("exp", p), lambda a, c: c)
log = _elementwise_unary("log", lambda p: _punary("log", p), lambda a, c: div(F(1.0), a))
tanh = _elementwise_unary("tanh", lambda p: _punary("tanh", p), lambda a, c: sub(F(1.0), mul(c, c)))
sigmoid = _elementwise_unary("sigmoid", lambda p: _punary("sigmoid", p),
                             lambda a, c: mul(c, sub(F(1.0), c)))
# relu'(0) = 0
relu = _elementwise_unary("relu", lambda p: _punary("relu", p), lambda a, c: Const(_pgt_zero(a.value)))

_sum_to = _Unary(
    "sum_to", _psum_to,
    lambda t, a, c, shape: sum_to(t, shape),
    lambda adj, a, c, shape: broadcast_to(adj, a.shape, _kind(a.value)),
)

broadcast_to = _Unary(
    "broadcast_to", _pbroadcast,
    lambda t, a, c, shape, kind: broadcast_to(t, shape, kind),
    lambda adj, a, c, shape, kind: sum_to(adj, a.shape),
)

reshape = _Unary(
    "reshape", lambda p, shape: nd.reshape(p, shape),
    lambda t, a, c, shape: reshape(t, shape),
    lambda adj, a, c, shape: reshape(adj, a.shape),
)

transpose = _Unary(
    "transpose", la.transpose,
    lambda t, a, c: transpose(t),
    lambda adj, a, c: transpose(adj),
)

matmul = _Binary(
    "matmul", la.matmul,
    lambda t, a, b, c: matmul(t, b), lambda t, a, b, c: matmul(a, t),
    lambda adj, a, b, c: matmul(adj, transpose(b)), lambda adj, a, b, c: matmul(transpose(a), adj),
)


_sum_all = _Unary(
    "sum", lambda p: _psum_to(p, None),
    lambda t, a, c: _sum_all(t),
    lambda adj, a, c: broadcast_to(adj, a.shape, _kind(a.value)),
)


def sum_to(x, shape) -> AdValue:
    """Sum ``x`` down to ``shape``; ``None`` reduces everything and records the op as ``sum``."""
    return _sum_all(x) if shape is None else _sum_to(x, shape)


def sum(x) -> AdValue:
    """Sum of all elements; the result is float-valued."""
    return _sum_all(x)


def mean(x) -> AdValue:
    x = lift(x)
    p = x.value
    n = p.size if isinstance(p, Ndarray) else 1
    return mul(sum(x), F(1.0 / n))


def softmax(x) -> AdValue:
    """Row-wise softmax of a matrix (or of a whole vector).

    The row maximum is subtracted for stability; it is taken as a constant,
    which leaves the derivative unchanged.
    """
    x = lift(x)
    p = x.value
    if not isinstance(p, Ndarray):
        raise ShapeError("softmax needs an array argument")
    if p.rank == 1:
        e = exp(sub(x, F(nd.max(p))))
        return div(e, sum(e))
    if p.rank != 2:
        raise ShapeError(f"softmax expects rank 1 or 2, got shape {p.shape}")
    shift = Const(nd.reshape(nd.max(p, 1), (p.shape[0], 1)))
    e = exp(sub(x, shift))
    return div(e, sum_to(e, (p.shape[0], 1)))


# ---------------------------------------------------------------------------
# derivative operators
# ---------------------------------------------------------------------------

def _unpack(v: AdValue):
    """Payload when the result is constant, else the (nested) value itself."""
    return v.payload if isinstance(v, Const) else v


def _tangent_at(y: AdValue, tag: int) -> AdValue:
    if isinstance(y, Forward) and y.tag == tag:
        return y.tangent
    return Const(_pzero(y.value))


def _primal_at(y: AdValue, tag: int) -> AdValue:
    if isinstance(y, (Forward, Reverse)) and y.tag == tag:
        return y.primal
    return y


def _reachable(root: Reverse) -> List[Reverse]:
    seen: Dict[int, Reverse] = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.id in seen:
            continue
        seen[node.id] = node
        stack.extend(parent for parent, _ in node.parents)
    # ids grow with creation order, so descending id is a reverse topological order
    return sorted(seen.values(), key=lambda n: n.id, reverse=True)


def backprop(y: Reverse, seed: AdValue) -> int:
    """Reverse sweep from ``y`` seeded with ``seed``; returns the number of nodes visited."""
    nodes = _reachable(y)
    for node in nodes:
        node.adjoint = None
    y.adjoint = lift(seed)
    for node in nodes:
        if node.adjoint is None:
            continue
        for parent, rule in node.parents:
            contrib = sum_to(rule(node.adjoint), parent.shape)
            parent.adjoint = contrib if parent.adjoint is None else add(parent.adjoint, contrib)
    logger.debug("Reverse sweep visited %d nodes", len(nodes))
    return len(nodes)


def _adjoint_of(x: Reverse) -> AdValue:
    return x.adjoint if x.adjoint is not None else Const(_pzero(x.value))


def value_and_diff(f: Callable, x) -> Tuple:
    """(f(x), f'(x)) for a scalar function, by forward mode."""
    tag = _next_tag()
    y = lift(f(Forward(lift(x), F(1.0), tag)))
    return _unpack(_primal_at(y, tag)), _unpack(_tangent_at(y, tag))


def diff(f: Callable, x):
    return value_and_diff(f, x)[1]


def jvp(f: Callable, x, v) -> Tuple:
    """(f(x), J.v) by seeding the tangent ``v``."""
    tag = _next_tag()
    y = lift(f(Forward(lift(x), lift(v), tag)))
    return _unpack(_primal_at(y, tag)), _unpack(_tangent_at(y, tag))


def _reverse_call(f: Callable, x, seed_for: Callable[[AdValue], AdValue]):
    tag = _next_tag()
    xr = Reverse(lift(x), tag)
    y = lift(f(xr))
    if isinstance(y, Reverse) and y.tag == tag:
        backprop(y, seed_for(y))
        return _unpack(y.primal), _unpack(_adjoint_of(xr))
    return _unpack(y), _unpack(Const(_pzero(xr.value)))


def _scalar_seed(y: AdValue) -> Const:
    p = y.value
    if isinstance(p, Ndarray):
        if p.shape != (1,):
            raise DifferentiationError(f"grad needs a scalar output, got shape {p.shape}")
        return Const(nd.ones((1,), p.kind))
    return F(1.0)


def value_and_grad(f: Callable, x) -> Tuple:
    """(f(x), gradient of f at x) by reverse mode; f must return a scalar."""
    return _reverse_call(f, x, _scalar_seed)


def grad(f: Callable, x):
    return value_and_grad(f, x)[1]


def vjp(f: Callable, x, v) -> Tuple:
    """(f(x), v^T.J) by seeding the output adjoint ``v``."""
    def seed(y):
        s = lift(v)
        if s.shape != y.shape:
            raise DifferentiationError(f"Adjoint seed shape {s.shape} differs from output {y.shape}")
        return s
    return _reverse_call(f, x, seed)


def grad_params(f: Callable[[Dict[str, AdValue]], AdValue],
                params: Dict[str, Ndarray]) -> Tuple[float, Dict[str, Ndarray]]:
    """Reverse mode over a named parameter set in one sweep."""
    tag = _next_tag()
    nodes = {name: Reverse(lift(p), tag, op_name=name) for name, p in params.items()}
    y = lift(f(nodes))
    if isinstance(y, Reverse) and y.tag == tag:
        backprop(y, _scalar_seed(y))
        grads = {name: _unpack(_adjoint_of(node)) for name, node in nodes.items()}
        return _unpack(y.primal), grads
    _scalar_seed(y)
    return _unpack(y), {name: _pzero(lift(p).value) for name, p in params.items()}


def _dense(p, what: str) -> np.ndarray:
    if isinstance(p, AdValue):
        raise DifferentiationError(f"{what} produced a perturbed value; nest through grad/diff instead")
    return np.atleast_1d(p.data if isinstance(p, Ndarray) else np.float64(p))


def jacobian(f: Callable, x: Ndarray) -> Ndarray:
    """Matrix [m;n] of partials; forward columns when n <= m, reverse rows otherwise."""
    x = lift(x).value
    kind = _kind(x)
    n = x.size if isinstance(x, Ndarray) else 1
    y0 = _unpack(lift(f(Const(x))))
    m = _dense(y0, "jacobian").size
    J = np.zeros((m, n), dtype=kind.dtype)

    def basis(shape, i):
        if shape is None:
            return 1.0
        e = nd.zeros(shape, kind)
        e.data[i] = 1.0
        return e

    if n <= m:
        for j in range(n):
            _, t = jvp(f, x, basis(_shape(x), j))
            J[:, j] = _dense(t, "jacobian")
    else:
        for i in range(m):
            _, g = vjp(f, x, basis(_shape(y0), i))
            J[i, :] = _dense(g, "jacobian")
    return nd.from_numpy(J, kind)


def hessian(f: Callable, x: Ndarray) -> Ndarray:
    """Forward-over-reverse: column j is the directional derivative of grad f along e_j."""
    return jacobian(lambda z: grad(f, z), x)


def trace(f: Callable, *inputs) -> AdValue:
    """Run ``f`` on reverse-mode inputs and return the output graph."""
    tag = _next_tag()
    nodes = [Reverse(lift(x), tag) for x in inputs]
    return lift(f(*nodes))


def export_dot(y: AdValue, name: str = "G") -> str:
    """DOT rendering of the reverse graph that produced ``y``."""
    lines = [f"digraph {name} {{"]
    if isinstance(y, Reverse):
        nodes = sorted(_reachable(y), key=lambda n: n.id)
        for node in nodes:
            p = node.value
            shape = "scalar" if _shape(p) is None else "[" + ";".join(str(d) for d in p.shape) + "]"
            lines.append(f'  n{node.id} [label="{node.op_name}\\n{_kind(p).value} {shape}\\n#{node.id}"];')
        for node in nodes:
            for parent, _ in node.parents:
                lines.append(f"  n{parent.id} -> n{node.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
