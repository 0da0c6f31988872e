"""
Sweep Tasks Package
"""
from tasks.sweep_pipeline import SweepPool, run_mode_sweep, run_zero_sweep, solve_mode

__all__ = ['SweepPool', 'run_mode_sweep', 'run_zero_sweep', 'solve_mode']
