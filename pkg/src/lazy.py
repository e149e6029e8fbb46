"""Lazily evaluated computation graphs with buffer reuse.

Building a node records the operation and its static shape; nothing is
computed until ``eval``. Evaluation walks the dirty part of the graph in
topological order. A parent's buffer is handed to its child (which then runs
the in-place twin of its op) when

* the parent is an intermediate node not held by a caller,
* the child is the parent's only consumer and has already been counted down,
* shapes and kinds agree, and
* the child depends on exactly the same variables as the parent.

The last rule keeps incremental re-evaluation correct: a parent whose buffer
was taken is only ever needed again when one of its variables changes, and
then the child is dirty too.

``assign`` marks a variable and everything downstream dirty; values are not
compared, so assigning an identical array still triggers recomputation.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from . import broadcast as bc
from . import ndarray as nd
from .errors import KindError, ReuseViolationError, ShapeError, UnassignedVariableError
from .ndarray import Kind, Ndarray, check_shape

logger = logging.getLogger(__name__)

LEAF_OPS = ("variable", "const")


@dataclass(eq=False)
class LazyNode:
    id: int
    op: str
    parents: Tuple["LazyNode", ...]
    shape: Tuple[int, ...]
    kind: Kind
    value: Optional[Ndarray] = None
    consumers: List["LazyNode"] = field(default_factory=list)
    dirty: bool = True
    reusable: bool = True
    variables: FrozenSet[int] = frozenset()
    name: Optional[str] = None

    @property
    def consumers_total(self) -> int:
        return len(self.consumers)

    @property
    def is_leaf(self) -> bool:
        return self.op in LEAF_OPS

    def __repr__(self):
        return f"LazyNode(#{self.id} {self.op} {list(self.shape)})"


class LazyGraph:
    """Owns the nodes of one lazy computation and its evaluation counters."""

    def __init__(self):
        self.nodes: List[LazyNode] = []
        self._ids = itertools.count()
        self.executions = 0
        self.allocations = 0
        self.reuses = 0

    def reset_counters(self):
        self.executions = self.allocations = self.reuses = 0

    # -- building -----------------------------------------------------------

    def _add(self, op, parents, shape, kind, **fields) -> LazyNode:
        node = LazyNode(next(self._ids), op, tuple(parents), shape, kind, **fields)
        for parent in node.parents:
            parent.consumers.append(node)
        self.nodes.append(node)
        return node

    def variable(self, shape, kind=Kind.F64, name: Optional[str] = None) -> LazyNode:
        node = self._add("variable", (), check_shape(shape), Kind(kind), reusable=False, name=name)
        node.variables = frozenset({node.id})
        return node

    def const(self, x: Ndarray, name: Optional[str] = None) -> LazyNode:
        return self._add("const", (), x.shape, x.kind, value=x.copy(),
                         dirty=False, reusable=False, name=name)

    def unary(self, op: str, x: LazyNode) -> LazyNode:
        if op not in nd.UNARY_OPS:
            raise ValueError(f"Unknown unary operation {op!r}")
        return self._add(op, (x,), x.shape, x.kind, variables=x.variables)

    def binary(self, op: str, a: LazyNode, b: LazyNode) -> LazyNode:
        if op not in bc.BINARY_KERNELS:
            raise ValueError(f"Unknown binary operation {op!r}")
        if a.kind is not b.kind:
            raise KindError(f"Cannot combine {a.kind.value} with {b.kind.value}")
        shape = bc.broadcast_plan(a.shape, b.shape).out_shape
        return self._add(op, (a, b), shape, a.kind, variables=a.variables | b.variables)

    def __getattr__(self, op: str):
        # g.sin(x), g.add(a, b) ...
        if op in nd.UNARY_OPS:
            return lambda x: self.unary(op, x)
        if op in bc.BINARY_KERNELS:
            return lambda a, b: self.binary(op, a, b)
        raise AttributeError(f"{type(self).__name__} has no operation {op!r}")

    # -- updating -----------------------------------------------------------

    def assign(self, var: LazyNode, value: Ndarray) -> None:
        if var.op != "variable":
            raise ValueError(f"Only variables can be assigned, got {var!r}")
        if value.shape != var.shape:
            raise ShapeError(f"Variable has shape {var.shape}, got {value.shape}")
        if value.kind is not var.kind:
            raise KindError(f"Variable is {var.kind.value}, got {value.kind.value}")
        var.value = value.copy()
        stack = [var]
        while stack:
            node = stack.pop()
            if node.dirty and node is not var:
                continue
            node.dirty = True
            stack.extend(node.consumers)

    # -- evaluation ---------------------------------------------------------

    @staticmethod
    def _needs_run(node: LazyNode) -> bool:
        return not node.is_leaf and (node.dirty or node.value is None)

    def _schedule(self, target: LazyNode) -> List[LazyNode]:
        """Post-order list of the nodes that must execute to produce ``target``."""
        order: List[LazyNode] = []
        done = set()
        stack = [(target, False)]
        while stack:
            node, expanded = stack.pop()
            if node.id in done:
                continue
            if node.is_leaf:
                if node.value is None:
                    raise UnassignedVariableError(f"Variable {node.name or node.id} is unassigned")
                done.add(node.id)
                continue
            if not self._needs_run(node):
                done.add(node.id)
                continue
            if expanded:
                done.add(node.id)
                order.append(node)
                continue
            stack.append((node, True))
            for parent in reversed(node.parents):
                if parent.id not in done:
                    stack.append((parent, False))
        return order

    def _reuse_candidate(self, node: LazyNode, remaining: Dict[int, int]) -> Optional[LazyNode]:
        for parent in node.parents:
            if (parent.reusable and not parent.is_leaf
                    and parent.consumers_total == 1 and remaining[parent.id] == 0
                    and parent.shape == node.shape and parent.kind is node.kind
                    and all(p.shape == node.shape for p in node.parents)
                    and node.variables <= parent.variables
                    and parent.value is not None):
                return parent
        return None

    def _execute(self, node: LazyNode, remaining: Dict[int, int], position: int,
                 last_read: Dict[int, int]) -> None:
        for parent in node.parents:
            remaining[parent.id] -= 1
        args = [p.value for p in node.parents]
        donor = self._reuse_candidate(node, remaining)
        if donor is not None:
            # last_read comes from the schedule, not from the consumer counts
            if last_read[donor.id] > position:
                raise ReuseViolationError(
                    f"{donor!r} is read again at step {last_read[donor.id]}, after step {position}")
            if len(args) == 1:
                result = nd.UNARY_OPS[node.op][1](args[0])
            else:
                result = bc.binop_into(node.op, args[0], args[1], donor.value)
            donor.value = None
            self.reuses += 1
        else:
            if len(args) == 1:
                result = nd.UNARY_OPS[node.op][0](args[0])
            else:
                result = bc.binop(node.op, args[0], args[1])
            self.allocations += 1
        node.value = result
        node.dirty = False
        self.executions += 1

    def eval(self, node: LazyNode, copy: bool = True) -> Ndarray:
        """Evaluate ``node``; ``copy=False`` returns the internal buffer for inspection."""
        node.reusable = False
        order = self._schedule(node)
        remaining: Dict[int, int] = {}
        last_read: Dict[int, int] = {}
        for position, n in enumerate(order):
            for parent in n.parents:
                remaining[parent.id] = remaining.get(parent.id, 0) + 1
                last_read[parent.id] = position
        before = (self.executions, self.allocations, self.reuses)
        for position, n in enumerate(order):
            self._execute(n, remaining, position, last_read)
        logger.debug("Lazy eval of %r: %d executions, %d allocations, %d reuses", node,
                     self.executions - before[0], self.allocations - before[1], self.reuses - before[2])
        return node.value.copy() if copy else node.value

    # -- inspection ---------------------------------------------------------

    def check_consumers(self) -> bool:
        """Recount parent references and compare them with each node's consumer list."""
        counts = {n.id: 0 for n in self.nodes}
        for n in self.nodes:
            for parent in n.parents:
                counts[parent.id] += 1
        return all(counts[n.id] == n.consumers_total for n in self.nodes)

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        for n in self.nodes:
            label = n.name or n.op
            shape = "[" + ";".join(str(d) for d in n.shape) + "]"
            lines.append(f'  n{n.id} [label="{label}\\n{n.kind.value} {shape}\\n#{n.id}"];')
        for n in self.nodes:
            for parent in n.parents:
                lines.append(f"  n{parent.id} -> n{n.id};")
        lines.append("}")
        return "\n".join(lines) + "\n"
