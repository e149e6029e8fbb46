"""
Results management for benchmark and demo runs.
Handles the CSV report, the aligned text table, loss histories and DOT files.
"""

import os
from typing import List, Optional

import pandas as pd

REPORT_COLUMNS = ['op', 'mean_ms', 'std_ms']


class ResultsManager:
    """
    Manages saving and printing benchmark results.
    """

    def __init__(self, results_dir: str = 'bench/results'):
        """Initialize results manager."""
        self.results_dir = results_dir
        os.makedirs(self.results_dir, exist_ok=True)

    def _path(self, filename: str) -> str:
        return os.path.join(self.results_dir, filename)

    def save_report(self, report_df: pd.DataFrame, name: str = 'bench') -> str:
        """Save the timing columns of a report to ``<name>.csv``."""
        path = self._path(f"{name}.csv")
        report_df[REPORT_COLUMNS].to_csv(path, index=False)
        return path

    def load_report(self, name: str = 'bench') -> pd.DataFrame:
        path = self._path(f"{name}.csv")
        if not os.path.exists(path):
            return pd.DataFrame(columns=REPORT_COLUMNS)
        return pd.read_csv(path)

    @staticmethod
    def format_table(report_df: pd.DataFrame) -> str:
        """Aligned two-column table, times as ``mean (std)`` in ms."""
        cells = [f"{row.mean_ms:.3f} ({row.std_ms:.3f})" for row in report_df.itertuples()]
        op_width = max([len('operation')] + [len(op) for op in report_df['op']])
        time_width = max([len('time (ms)')] + [len(c) for c in cells])
        lines = [f"{'operation':<{op_width}}  {'time (ms)':>{time_width}}",
                 f"{'-' * op_width}  {'-' * time_width}"]
        for op, cell in zip(report_df['op'], cells):
            lines.append(f"{op:<{op_width}}  {cell:>{time_width}}")
        return "\n".join(lines)

    def print_report(self, report_df: pd.DataFrame) -> None:
        """Print report table and correctness summary to console."""
        print(self.format_table(report_df))
        if 'passed' in report_df:
            failed = report_df.loc[~report_df['passed'], 'op'].tolist()
            print(f"Correctness: {len(report_df) - len(failed)}/{len(report_df)} operations passed")
            for op in failed:
                print(f"  FAILED: {op}")
        print("-" * 50)

    def save_history(self, history: List[float], name: str) -> str:
        """Save a loss history as ``<name>_history.csv`` with columns iteration,loss."""
        path = self._path(f"{name}_history.csv")
        pd.DataFrame({'iteration': range(1, len(history) + 1), 'loss': history}).to_csv(path, index=False)
        return path

    def load_history(self, name: str) -> Optional[List[float]]:
        path = self._path(f"{name}_history.csv")
        if not os.path.exists(path):
            return None
        return pd.read_csv(path)['loss'].tolist()

    def save_dot(self, dot: str, name: str) -> str:
        path = self._path(f"{name}.dot")
        with open(path, 'w') as f:
            f.write(dot)
        return path
