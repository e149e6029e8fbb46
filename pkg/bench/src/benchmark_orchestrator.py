"""
Main benchmark orchestrator.
Coordinates input preparation, timed repetitions, correctness checks and reporting.
"""

import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

# Add repository root to path to import from src
repo_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, repo_root)

from src import ndarray as nd
from src.actor import MapReduceEngine, make_parallel_ndarray
from src.configuration import Configuration
from bench.src.benchmark_suite import OPERATIONS, BenchInputs, build_operations
from bench.src.evaluator import BenchEvaluator, digest
from bench.src.results_manager import ResultsManager

logger = logging.getLogger(__name__)

ENGINES = ('sequential', 'mapreduce')


@dataclass
class BenchConfig:
    size: int = 1000
    repeats: int = 100
    warmup: int = 10
    seed: int = 42
    ops: List[str] = field(default_factory=lambda: list(OPERATIONS))
    output_dir: str = 'bench/results'
    engine: str = 'sequential'
    workers: int = 4
    threshold: int = 10_000

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")
        if not self.repeats > self.warmup >= 0:
            raise ValueError(f"repeats ({self.repeats}) must exceed warmup ({self.warmup}), which must be >= 0")
        unknown = [op for op in self.ops if op not in OPERATIONS]
        if unknown:
            raise ValueError(f"Unknown benchmark operations: {unknown}; choose from {OPERATIONS}")
        if self.engine not in ENGINES:
            raise ValueError(f"bench engine must be one of {ENGINES}, got {self.engine!r}")

    @classmethod
    def from_configuration(cls, config: Configuration, **overrides) -> "BenchConfig":
        """Defaults from ``Configuration``; ``None`` overrides are ignored."""
        values = dict(config.get_bench_config())
        engine = config.get_engine_config()
        values['workers'], values['threshold'] = engine['workers'], engine['threshold']
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class BenchReport:
    """Per-operation timings over the post-warmup runs, with result digests."""
    rows: List[dict]
    config: BenchConfig

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=['op', 'mean_ms', 'std_ms', 'passed', 'digest', 'detail'])

    def digests(self) -> dict:
        return {row['op']: row['digest'] for row in self.rows}


def time_operation(fn, repeats: int, warmup: int):
    """Run ``fn`` ``repeats`` times; the first ``warmup`` timings are dropped."""
    times_ms = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times_ms.append((time.perf_counter() - start) * 1000.0)
    kept = times_ms[warmup:]
    return float(np.mean(kept)), float(np.std(kept)), result


class BenchmarkOrchestrator:
    """
    Main class for orchestrating benchmark runs.
    """

    def __init__(self, config: Optional[Configuration] = None, results_dir: Optional[str] = None):
        """Initialize the orchestrator."""
        self.config = config or Configuration()
        self.results_manager = ResultsManager(results_dir or self.config.get('output_dir'))

    def _surface(self, bench: BenchConfig):
        if bench.engine == 'mapreduce':
            engine = MapReduceEngine(bench.workers, bench.threshold)
            return engine, make_parallel_ndarray(nd, engine)
        return None, nd

    def run_benchmark(self, bench: BenchConfig, save: bool = True) -> BenchReport:
        """
        Time every configured operation on a seeded uniform matrix.

        Args:
            bench: Benchmark configuration
            save: Write the CSV report into the results directory
        """
        print(f"Starting benchmark on a {bench.size}x{bench.size} uniform matrix "
              f"({bench.repeats} runs, {bench.warmup} warm-up, engine={bench.engine})")
        print("=" * 60)

        inputs = BenchInputs.create(bench.size, bench.seed)
        evaluator = BenchEvaluator(inputs)
        engine, surface = self._surface(bench)
        operations = build_operations(inputs, surface, bench.ops)

        rows = []
        try:
            for i, (op, fn) in enumerate(operations.items()):
                try:
                    print(f"Benchmarking {op} ({i + 1}/{len(operations)})")
                    mean_ms, std_ms, result = time_operation(fn, bench.repeats, bench.warmup)
                    check = evaluator.evaluate(op, result)
                    rows.append({'op': op, 'mean_ms': mean_ms, 'std_ms': std_ms, 'passed': check['passed'],
                                 'digest': digest(result), 'detail': check['detail']})
                    logger.debug("%s: %.3f ms (%.3f), %s", op, mean_ms, std_ms, check['detail'])
                except Exception as e:
                    print(f"Error in operation {op}: {str(e)}")
                    rows.append({'op': op, 'mean_ms': float('nan'), 'std_ms': float('nan'), 'passed': False,
                                 'digest': '', 'detail': f"ERROR: {e}"})
        finally:
            if engine is not None:
                engine.close()

        report = BenchReport(rows, bench)
        frame = report.to_frame()
        print("=" * 60)
        self.results_manager.print_report(frame)
        if save:
            path = self.results_manager.save_report(frame)
            print(f"Benchmark complete! Results saved in {path}")
        return report
