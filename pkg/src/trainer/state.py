"""Mutable state of one continual-distillation run."""

from dataclasses import dataclass, field
from typing import List, Optional

import torch

from src.data import TaskSpec
from src.evalkit import AccuracyMatrix
from src.losses import TrainingLog
from src.memory import MemoryBuffer
from src.nets import GeneratorPair, MultiHeadClassifier
from src.trainer.config import TrainConfig


@dataclass
class RunState:
    cfg: TrainConfig
    model: MultiHeadClassifier
    tasks: List[TaskSpec]
    rng: torch.Generator
    latent_dim: int
    seed: int = 0
    device: torch.device = field(default_factory=lambda: torch.device("cpu"))
    task_id: int = 0
    generators: Optional[GeneratorPair] = None
    generator_optimizer: Optional[torch.optim.Optimizer] = None
    cl_optimizer: Optional[torch.optim.Optimizer] = None
    snapshot: Optional[MultiHeadClassifier] = None
    memory: MemoryBuffer = None
    accuracy: AccuracyMatrix = field(default_factory=AccuracyMatrix)
    log: TrainingLog = field(default_factory=TrainingLog)
    ledgers: list = field(default_factory=list)
    truncated_tasks: List[int] = field(default_factory=list)
    epoch: int = 0

    def __post_init__(self):
        if self.memory is None:
            self.memory = MemoryBuffer(self.cfg.memory_capacity)

    @property
    def task(self) -> TaskSpec:
        return self.tasks[self.task_id - 1]


def make_optimizer(name: str, params, lr: float, momentum: float = 0.0) -> torch.optim.Optimizer:
    if name == "sgd":
        return torch.optim.SGD(params, lr=lr, momentum=momentum)
    if name == "adam":
        return torch.optim.Adam(params, lr=lr)
    raise ValueError(f"Unknown optimizer: {name}")


def begin_task(state: RunState, task_id: int, num_classes: int) -> None:
    """Add the task's head, reinitialize the generators and both optimizers."""
    state.task_id = task_id
    state.epoch = 0
    head_id = state.model.add_head(num_classes)
    if head_id != task_id:
        raise ValueError(f"Task {task_id} arrived out of order (model has {head_id} heads)")

    state.generators = GeneratorPair(state.latent_dim, state.model.image_shape).to(state.device)
    cfg = state.cfg
    state.generator_optimizer = make_optimizer(cfg.generator_optimizer, state.generators.parameters(), cfg.generator_lr)
    state.cl_optimizer = make_optimizer(cfg.cl_optimizer, state.model.parameters(), cfg.cl_lr, cfg.cl_momentum)
