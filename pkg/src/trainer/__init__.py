"""Continual distillation from a stream of query-only APIs."""

from src.trainer.artifacts import RunArtifacts
from src.trainer.config import AblationConfig, TrainConfig, parse_budget
from src.trainer.loop import RunResult, new_run_state, run_stream, train_task
from src.trainer.state import RunState, begin_task, make_optimizer
from src.trainer.steps import cl_step, generator_step

__all__ = [
    "AblationConfig",
    "RunArtifacts",
    "RunResult",
    "RunState",
    "TrainConfig",
    "begin_task",
    "cl_step",
    "generator_step",
    "make_optimizer",
    "new_run_state",
    "parse_budget",
    "run_stream",
    "train_task",
]
