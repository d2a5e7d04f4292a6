"""Comparison methods sharing data, nets and metrics with the main pipeline."""

from src.baselines.supervised import (
    BaselineResult,
    SupervisedConfig,
    run_classic_cl,
    run_joint,
    run_sequential,
)
from src.baselines.white_box import evaluate_models_avg, run_ex_model, run_models_avg

__all__ = [
    "BaselineResult",
    "SupervisedConfig",
    "evaluate_models_avg",
    "run_classic_cl",
    "run_ex_model",
    "run_joint",
    "run_models_avg",
    "run_sequential",
]
