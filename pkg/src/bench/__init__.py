"""Efficiency harness and gradient check suite."""

from src.bench.gradients import run_suite
from src.bench.harness import BenchReport, Timing, run_bench, speedup

__all__ = ['BenchReport', 'Timing', 'run_bench', 'run_suite', 'speedup']
