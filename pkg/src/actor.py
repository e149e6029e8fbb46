"""In-process parallel engines and the adapters that lift modules onto them.

``MapReduceEngine`` splits arrays along axis 0 into contiguous chunks (sizes
differ by at most one) and runs chunk work on a thread pool. Results are
always merged in chunk order, so an engine's output depends only on the
input and the worker count.

``ParamServerEngine`` runs synchronous rounds: every worker pulls the same
parameters, pushes a gradient, and once all workers have pushed the server
averages the gradients in worker order and applies the registered update.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import algodiff as ad
from . import broadcast as bc
from . import ndarray as nd
from .errors import EngineError, ProtocolError, UnsupportedOperationError
from .ndarray import Ndarray
from .optimise import Batch, Optimiser, Params, Theta, as_float
from .slicing import Range, get_slice

logger = logging.getLogger(__name__)


def partition(n: int, parts: int) -> List[Tuple[int, int]]:
    """Split [0, n) into ``min(parts, n)`` contiguous half-open ranges whose sizes differ by <= 1."""
    if n < 1:
        raise EngineError("Cannot partition an empty range")
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    bounds, start = [], 0
    for i in range(parts):
        stop = start + base + (1 if i < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def split_rows(x: Ndarray, bounds: Sequence[Tuple[int, int]]) -> List[Ndarray]:
    return [get_slice([Range(start, stop - 1, 1)], x) for start, stop in bounds]


class _PooledEngine:
    def __init__(self, workers: int):
        if workers < 1:
            raise EngineError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self._pool: Optional[ThreadPoolExecutor] = None

    @property
    def pool(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers)
        return self._pool

    def run(self, fn: Callable, items: Sequence) -> List:
        if len(items) == 1:
            return [fn(items[0])]
        return list(self.pool.map(fn, items))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


class MapReduceEngine(_PooledEngine):
    """Data-parallel map / reduce / collect over row chunks."""

    def __init__(self, workers: int = 4, threshold: int = 10_000):
        super().__init__(workers)
        self.threshold = threshold

    def chunk_bounds(self, x: Ndarray) -> List[Tuple[int, int]]:
        # small arrays are not worth splitting
        if x.size < self.threshold:
            return [(0, x.shape[0])]
        return partition(x.shape[0], self.workers)

    def split(self, x: Ndarray) -> List[Ndarray]:
        return split_rows(x, self.chunk_bounds(x))

    def map(self, f: Callable, x: Ndarray) -> Ndarray:
        return self.collect(self.run(lambda c: nd.map(f, c), self.split(x)))

    def reduce(self, g: Callable, init: float, x: Ndarray) -> float:
        """Fold the chunks in chunk order, each one starting from the previous accumulator.

        The element order is the same as ``nd.fold(g, init, x)``, so the result
        is bitwise equal to the sequential fold for any worker count.
        """
        acc = init
        for chunk in self.split(x):
            acc = nd.fold(g, acc, chunk)
        return float(acc)

    def collect(self, parts: Sequence[Ndarray]) -> Ndarray:
        if not parts:
            raise EngineError("Nothing to collect")
        if len(parts) == 1:
            return parts[0]
        merged = np.concatenate([p.numpy() for p in parts], axis=0)
        return nd.from_numpy(merged, parts[0].kind)


class ParamServerEngine(_PooledEngine):
    """Synchronous parameter server with mean gradient aggregation."""

    def __init__(self, workers: int = 4):
        super().__init__(workers)
        self._lock = threading.Lock()
        self._update: Optional[Callable[[Theta, Theta], Theta]] = None
        self.params: Optional[Theta] = None
        self.round = 0
        self._pending: Dict[int, Theta] = {}
        self._losses: Dict[int, float] = {}
        self.round_losses: List[float] = []

    def register(self, update_fn: Callable[[Theta, Theta], Theta], params0: Theta) -> None:
        with self._lock:
            self._update = update_fn
            self.params = dict(params0)
            self.round = 0
            self._pending.clear()
            self._losses.clear()
            self.round_losses = []

    @property
    def registered(self) -> bool:
        return self._update is not None

    def _check_worker(self, worker: int):
        if self._update is None:
            raise ProtocolError("No update function registered")
        if not 0 <= worker < self.workers:
            raise ProtocolError(f"Unknown worker {worker}")

    def pull(self, worker: int) -> Theta:
        with self._lock:
            self._check_worker(worker)
            return dict(self.params)

    def push(self, worker: int, grads: Theta, loss: float = 0.0) -> None:
        with self._lock:
            self._check_worker(worker)
            if worker in self._pending:
                raise ProtocolError(f"Worker {worker} already pushed in round {self.round}")
            self._pending[worker] = grads
            self._losses[worker] = loss
            if len(self._pending) == self.workers:
                self._finish_round()

    def _finish_round(self):
        ordered = [self._pending[w] for w in range(self.workers)]
        mean = {}
        for name in ordered[0]:
            acc = ordered[0][name]
            for grads in ordered[1:]:
                acc = bc.add(acc, grads[name])
            mean[name] = bc.div_scalar(acc, float(self.workers))
        self.params = self._update(self.params, mean)
        self.round_losses.append(sum(self._losses[w] for w in range(self.workers)) / self.workers)
        self._pending.clear()
        self._losses.clear()
        self.round += 1
        logger.debug("Parameter server finished round %d", self.round)


class ParamServerRunner:
    """``minimize`` runner that shards each batch across parameter-server workers."""

    def __init__(self, engine: ParamServerEngine):
        self.engine = engine
        self._optimiser: Optional[Optimiser] = None

    def round(self, objective, theta, xb, yb, optimiser):
        engine = self.engine
        if self._optimiser is not optimiser:
            engine.register(optimiser.step, theta)
            self._optimiser = optimiser
        n = xb.shape[0]
        if n < engine.workers:
            raise EngineError(f"Batch of {n} rows cannot feed {engine.workers} workers")
        bounds = partition(n, engine.workers)
        shards = list(zip(range(engine.workers), split_rows(xb, bounds), split_rows(yb, bounds)))

        def work(shard):
            worker, xs, ys = shard
            params = engine.pull(worker)
            value, grads = ad.grad_params(lambda th: objective(th, xs, ys), params)
            engine.push(worker, grads, as_float(value))

        engine.run(work, shards)
        return engine.round_losses[-1], dict(engine.params)


_SCAN_OPS = ("scan", "cumsum", "cumprod", "cummin", "cummax")


class ParallelNdarray:
    """The ndarray surface with map and fold families routed through a map-reduce engine."""

    def __init__(self, module, engine: MapReduceEngine):
        self._module = module
        self.engine = engine

    def map(self, f, x):
        return self.engine.map(f, x)

    def fold(self, f, init, x, axis=None):
        if axis is not None:
            return self._module.fold(f, init, x, axis)
        return self.engine.reduce(f, init, x)

    def sum(self, x, axis=None):
        return self.fold(np.add, 0.0, x, axis)

    def prod(self, x, axis=None):
        return self.fold(np.multiply, 1.0, x, axis)

    def min(self, x, axis=None):
        return self.fold(np.minimum, np.inf, x, axis)

    def max(self, x, axis=None):
        return self.fold(np.maximum, -np.inf, x, axis)

    def __getattr__(self, name: str) -> Any:
        if name in _SCAN_OPS:
            def unsupported(*args, **kwargs):
                raise UnsupportedOperationError(f"{name} crosses chunk boundaries and has no parallel form")
            return unsupported
        module = self.__dict__["_module"]
        if name in module.UNARY_KERNELS:
            kernel = module.UNARY_KERNELS[name]
            return lambda x: self.engine.map(kernel, x)
        return getattr(module, name)


def make_parallel_ndarray(module, engine: MapReduceEngine) -> ParallelNdarray:
    return ParallelNdarray(module, engine)


class ParallelNeural:
    """The neural trainer with every round executed by a parameter server."""

    def __init__(self, module, engine: ParamServerEngine):
        self._module = module
        self.engine = engine

    def train(self, net, params: Params, x: Ndarray, y: Ndarray):
        if not isinstance(params.batch, (Batch.Full, Batch.Mini)):
            raise EngineError("Parameter-server training needs Full or Mini batches")
        return self._module.train(net, params, x, y, runner=ParamServerRunner(self.engine))

    def __getattr__(self, name: str) -> Any:
        return getattr(self.__dict__["_module"], name)


def make_parallel_neural(module, engine: ParamServerEngine) -> ParallelNeural:
    return ParallelNeural(module, engine)
