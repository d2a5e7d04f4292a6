"""Baselines with parameter access to the teachers: Models-Avg and Ex-Model."""

from pathlib import Path
from typing import List, Optional, Sequence

import torch

from src.blackbox import WhiteBoxTeacher
from src.baselines.supervised import BaselineResult
from src.data import TaskStream
from src.evalkit import evaluate_row
from src.nets import ArchitectureError, MultiHeadClassifier, build_classifier
from src.trainer import RunResult, TrainConfig, run_stream
from src.utils.logger import setup_logger


logger = setup_logger(__name__)


def run_models_avg(teachers: Sequence[MultiHeadClassifier]) -> MultiHeadClassifier:
    """Parameter-wise mean of the teachers' trunks; teacher k's head becomes head k."""
    if not teachers:
        raise ValueError("Models-Avg needs at least one teacher")
    first = teachers[0]
    for k, teacher in enumerate(teachers, start=1):
        if teacher.architecture_id != first.architecture_id or teacher.image_shape != first.image_shape:
            raise ArchitectureError(
                f"Teacher {k} is {teacher.architecture_id} on {teacher.image_shape}; "
                f"Models-Avg needs every teacher to match {first.architecture_id} on {first.image_shape}"
            )
        if teacher.num_heads != 1:
            raise ArchitectureError(f"Teacher {k} has {teacher.num_heads} heads, expected a single-task model")

    averaged = build_classifier(first.architecture_id, first.image_shape, [t.head_sizes[0] for t in teachers])
    trunk_states = [t.trunk.state_dict() for t in teachers]
    mean_state = {}
    for key, value in trunk_states[0].items():
        if value.is_floating_point():
            mean_state[key] = torch.stack([s[key].cpu() for s in trunk_states]).mean(dim=0)
        else:
            # integer buffers such as BatchNorm step counters
            mean_state[key] = value.clone().cpu()
    averaged.trunk.load_state_dict(mean_state)
    with torch.no_grad():
        for head, teacher in zip(averaged.heads, teachers):
            head.weight.copy_(teacher.heads[0].weight)
            head.bias.copy_(teacher.heads[0].bias)
    logger.info(f"Averaged {len(teachers)} {first.architecture_id} teachers")
    return averaged.eval()


def evaluate_models_avg(
    stream: TaskStream, teachers: Sequence[MultiHeadClassifier], eval_batch_size: int = 256
) -> BaselineResult:
    model = run_models_avg(teachers)
    final = evaluate_row(model, list(stream), eval_batch_size)
    logger.info(f"Models-Avg accuracies {[round(a, 4) for a in final]}")
    return BaselineResult(model, final)


def run_ex_model(
    stream: TaskStream,
    teachers: Sequence[MultiHeadClassifier],
    cfg: Optional[TrainConfig] = None,
    seed: int = 0,
    run_dir: Optional[Path] = None,
) -> RunResult:
    """The continual pipeline with exact generator gradients backpropagated through each teacher."""
    apis: List[WhiteBoxTeacher] = [WhiteBoxTeacher(t, k) for k, t in enumerate(teachers, start=1)]
    return run_stream(stream, apis, cfg or TrainConfig(), seed, run_dir)
