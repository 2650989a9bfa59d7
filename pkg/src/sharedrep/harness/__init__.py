"""Experiment orchestration: configs, sweeps, rate fits and plot data."""

from .analysis import RateFit, classify_phase, fit_rate_exponent
from .config import ExperimentConfig, TransferBlock, expand_grid, load_config_file, preset_grid
from .plots import emit_plot_data
from .runner import ResultRow, SweepResult, read_results, run_trial, sweep

__all__ = [
    "ExperimentConfig",
    "TransferBlock",
    "expand_grid",
    "load_config_file",
    "preset_grid",
    "run_trial",
    "sweep",
    "ResultRow",
    "SweepResult",
    "read_results",
    "fit_rate_exponent",
    "RateFit",
    "classify_phase",
    "emit_plot_data",
]
