"""
Foldwise benchmark and demo command line.

    python bench/main.py bench --size 1000 --repeats 100 --warmup 10
    python bench/main.py graph
    python bench/main.py lasso --alpha 0.001
    python bench/main.py train-xor
    python bench/main.py dist-train --engine ps --workers 4
"""

import argparse
import logging
import sys
import os

# Add the repository root to Python path
repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, repo_root)

from src import ndarray as nd
from src.configuration import Configuration
from bench.src import demos
from bench.src.benchmark_orchestrator import BenchConfig, BenchmarkOrchestrator
from bench.src.benchmark_suite import OPERATIONS
from bench.src.results_manager import ResultsManager


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run Foldwise benchmarks and demos.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Random seed (default from configuration)')
    common.add_argument('--out', type=str, default=None, help='Output directory for CSV and DOT files')
    sub = parser.add_subparsers(dest='command', required=True)

    bench = sub.add_parser('bench', parents=[common], help='Time the benchmark operation set')
    bench.add_argument('--size', type=int, default=None, help='Matrix dimension')
    bench.add_argument('--repeats', type=int, default=None, help='Timed runs per operation')
    bench.add_argument('--warmup', type=int, default=None, help='Leading runs excluded from statistics')
    bench.add_argument('--engine', choices=['sequential', 'mapreduce'], default='sequential',
                       help='Engine for the map and fold rows')
    bench.add_argument('--workers', type=int, default=None, help='Map-reduce worker count')
    bench.add_argument('--ops', type=str, default=None,
                       help=f"Semicolon-separated subset of: {'; '.join(OPERATIONS)}")

    sub.add_parser('graph', parents=[common], help='Write the DOT graph of the demo function')

    lasso = sub.add_parser('lasso', parents=[common], help='Fit a sparse linear model')
    lasso.add_argument('--alpha', type=float, default=0.001, help='L1 penalty strength')

    xor = sub.add_parser('train-xor', parents=[common], help='Train a 2-4-2 network on XOR')
    xor.add_argument('--epochs', type=float, default=5000., help='Full-batch iterations')

    dist = sub.add_parser('dist-train', parents=[common], help='Train a network through a parameter server')
    dist.add_argument('--engine', choices=['ps', 'sequential'], default='ps', help='Training engine')
    dist.add_argument('--workers', type=int, default=None, help='Parameter-server worker count')
    dist.add_argument('--epochs', type=float, default=200., help='Full-batch iterations')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = Configuration()
    logging.basicConfig(level=config.get('log_level'), format='%(levelname)s %(name)s: %(message)s')
    seed = config.get('seed') if args.seed is None else args.seed
    out = args.out or config.get('output_dir')

    try:
        if args.command == 'bench':
            config.print_config_summary()
            ops = [op.strip() for op in args.ops.split(';')] if args.ops else None
            bench_config = BenchConfig.from_configuration(
                config, size=args.size, repeats=args.repeats, warmup=args.warmup, seed=seed,
                ops=ops, output_dir=out, engine=args.engine, workers=args.workers)
            report = BenchmarkOrchestrator(config, out).run_benchmark(bench_config)
            return 0 if all(row['passed'] for row in report.rows) else 1

        results = ResultsManager(out)
        if args.command == 'graph':
            path = results.save_dot(demos.graph_demo(), 'graph')
            print(f"Graph written to {path}")
        elif args.command == 'lasso':
            demo = demos.lasso_demo(alpha=args.alpha, seed=seed)
            path = results.save_history(demo.history, 'lasso')
            print(f"Lasso fitted in {len(demo.history)} iterations; history saved in {path}")
            print("  Largest weights:")
            w = demo.model.w.numpy()[:, 0]
            for i in sorted(range(len(w)), key=lambda j: -abs(w[j]))[:5]:
                print(f"    w[{i}] = {w[i]:+.4f} (true {demo.true_w[i, 0]:+.4f})")
        elif args.command == 'train-xor':
            net = demos.xor_demo(seed=seed, epochs=args.epochs)
            x, y = nd.of_array(demos.XOR_X), nd.of_array(demos.XOR_Y)
            path = results.save_history(net.history, 'xor')
            print(f"XOR accuracy {net.accuracy(x, y):.2f} after {len(net.history)} iterations; history saved in {path}")
        elif args.command == 'dist-train':
            workers = args.workers or config.get('workers')
            net = demos.dist_train_demo(workers=workers, seed=seed, epochs=args.epochs, engine=args.engine)
            path = results.save_history(net.history, f"dist_train_{args.engine}_{workers}")
            print(f"Distributed training finished after {len(net.history)} rounds; history saved in {path}")
    except Exception as e:
        print(f"Error in {args.command}: {str(e)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
