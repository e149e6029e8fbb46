"""Tests for the benchmark harness and the demo command line."""

import os

import numpy as np
import pandas as pd
import pytest

from bench.main import main
from bench.src import demos
from bench.src.benchmark_orchestrator import BenchConfig, BenchmarkOrchestrator, time_operation
from bench.src.benchmark_suite import OPERATIONS, BenchInputs, build_operations
from bench.src.results_manager import REPORT_COLUMNS, ResultsManager
from src.configuration import Configuration


@pytest.fixture
def orchestrator(tmp_path):
    return BenchmarkOrchestrator(Configuration("defaults"), str(tmp_path))


def _small(**changes):
    values = dict(size=8, repeats=3, warmup=1, seed=42)
    values.update(changes)
    return BenchConfig(**values)


@pytest.mark.parametrize("changes", [
    dict(ops=["transpose"]),
    dict(repeats=10, warmup=10),
    dict(warmup=-1),
    dict(size=0),
    dict(engine="gpu"),
])
def test_bench_config_validation(changes):
    with pytest.raises(ValueError):
        _small(**changes)


def test_bench_config_from_configuration():
    bench = BenchConfig.from_configuration(Configuration("defaults"), size=16, repeats=None)
    assert bench.size == 16
    assert bench.repeats == 100
    assert bench.workers == 4


def test_time_operation_drops_warmup_runs():
    calls = []
    mean_ms, std_ms, result = time_operation(lambda: calls.append(1) or len(calls), 12, 10)
    assert len(calls) == 12
    assert result == 12
    assert mean_ms >= 0.0 and std_ms >= 0.0


def test_operation_subset_keeps_table_order():
    inp = BenchInputs.create(6, 1)
    ops = build_operations(inp, ops=["iter", "x + y"])
    assert list(ops) == ["x + y", "iter"]
    assert ops["iter"]() == 36.0
    with pytest.raises(ValueError):
        build_operations(inp, ops=["nope"])


def test_small_run_passes_and_is_reproducible(orchestrator, tmp_path):
    first = orchestrator.run_benchmark(_small())
    second = orchestrator.run_benchmark(_small(), save=False)
    assert [row['op'] for row in first.rows] == OPERATIONS
    assert all(row['passed'] for row in first.rows)
    assert first.digests() == second.digests()

    frame = pd.read_csv(tmp_path / "bench.csv")
    assert list(frame.columns) == REPORT_COLUMNS
    assert list(frame['op']) == OPERATIONS


def test_mapreduce_engine_rows_agree(orchestrator):
    seq = orchestrator.run_benchmark(_small(), save=False).digests()
    par = orchestrator.run_benchmark(_small(engine="mapreduce", workers=3, threshold=0), save=False)
    assert all(row['passed'] for row in par.rows)
    digests = par.digests()
    for op in OPERATIONS:
        if op != "sum (fold)":
            assert digests[op] == seq[op]


def test_format_table():
    frame = pd.DataFrame([{'op': 'iter', 'mean_ms': 1.23456, 'std_ms': 0.5}])
    lines = ResultsManager.format_table(frame).splitlines()
    assert lines[0].startswith("operation")
    assert lines[2].endswith("1.235 (0.500)")


def test_history_roundtrip(tmp_path):
    results = ResultsManager(str(tmp_path))
    path = results.save_history([3.0, 2.0, 1.5], "demo")
    assert os.path.basename(path) == "demo_history.csv"
    assert results.load_history("demo") == [3.0, 2.0, 1.5]
    assert results.load_history("missing") is None


def test_graph_command_writes_dot(tmp_path):
    assert main(["graph", "--out", str(tmp_path)]) == 0
    dot = (tmp_path / "graph.dot").read_text()
    assert dot.startswith("digraph graph_function {")
    assert 'label="sum\\n' in dot
    assert 'label="sum_to' not in dot


def test_bad_flags_exit():
    with pytest.raises(SystemExit):
        main(["bench", "--size", "big"])
    with pytest.raises(SystemExit):
        main(["unknown"])


def test_unknown_op_is_reported(tmp_path):
    assert main(["bench", "--size", "4", "--repeats", "2", "--warmup", "1",
                 "--ops", "nope", "--out", str(tmp_path)]) == 1


def test_bench_command(tmp_path):
    code = main(["bench", "--size", "6", "--repeats", "3", "--warmup", "1",
                 "--ops", "relu (map);sum (fold)", "--out", str(tmp_path)])
    assert code == 0
    assert list(pd.read_csv(tmp_path / "bench.csv")['op']) == ["relu (map)", "sum (fold)"]


def test_train_xor_command(tmp_path):
    assert main(["train-xor", "--epochs", "20", "--out", str(tmp_path)]) == 0
    assert len(pd.read_csv(tmp_path / "xor_history.csv")) <= 20


def test_dist_train_matches_sequential():
    dist = demos.dist_train_demo(workers=4, epochs=20)
    seq = demos.dist_train_demo(epochs=20, engine="sequential")
    assert len(dist.history) == len(seq.history)
    assert np.allclose(dist.history, seq.history, rtol=0, atol=1e-10)


def test_lasso_demo_finds_support():
    demo = demos.lasso_demo(seed=3)
    w = np.abs(demo.model.w.numpy()[:, 0])
    support = demo.true_w[:, 0] != 0
    assert w[~support].max() < w[support].min()


def test_lasso_command(tmp_path):
    assert main(["lasso", "--alpha", "0.001", "--seed", "5", "--out", str(tmp_path)]) == 0
    loss = pd.read_csv(tmp_path / "lasso_history.csv")['loss'].tolist()
    assert len(loss) > 11
    assert all(loss[i + 1] <= loss[i] for i in range(10, len(loss) - 1))


def test_dist_train_command_worker_counts_agree(tmp_path):
    for workers in ("4", "1"):
        assert main(["dist-train", "--workers", workers, "--epochs", "15", "--out", str(tmp_path)]) == 0
    four = pd.read_csv(tmp_path / "dist_train_ps_4_history.csv")['loss'].to_numpy()
    one = pd.read_csv(tmp_path / "dist_train_ps_1_history.csv")['loss'].to_numpy()
    assert four.shape == one.shape
    assert np.allclose(four, one, rtol=0, atol=1e-10)


@pytest.mark.slow
def test_default_size_bench(orchestrator):
    report = orchestrator.run_benchmark(BenchConfig(repeats=2, warmup=1), save=False)
    assert len(report.rows) == 8
    assert all(row['passed'] for row in report.rows)
