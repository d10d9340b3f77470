"""Experiment orchestration, metrics, plotting."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import CSV_HEADER, ResultRow, run_experiment, run_trials
from .metrics import heldout_surrogate_loss, normalized_performance, pearson_correlation
from .plot import render_plot

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "CSV_HEADER", "ResultRow", "run_experiment", "run_trials",
    "heldout_surrogate_loss", "normalized_performance", "pearson_correlation",
    "render_plot",
]
