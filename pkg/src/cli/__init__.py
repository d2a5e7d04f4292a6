"""Command-line surface: teacher preparation, method runs and reports."""

from src.cli.commands import (
    METHODS,
    CommandError,
    aggregate_results,
    cmd_run,
    cmd_train_apis,
    load_run,
    run_method,
)
from src.cli.experiment import ConfigError, ExperimentConfig, apply_overrides, load_experiment
from src.cli.registry import TeacherRegistry
from src.cli.report import cmd_report

__all__ = [
    "METHODS",
    "CommandError",
    "ConfigError",
    "ExperimentConfig",
    "TeacherRegistry",
    "aggregate_results",
    "apply_overrides",
    "cmd_report",
    "cmd_run",
    "cmd_train_apis",
    "load_experiment",
    "load_run",
    "run_method",
]
