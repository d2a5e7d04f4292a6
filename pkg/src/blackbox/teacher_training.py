"""Supervised training of per-task teachers that are then hidden behind an API."""

import math
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from pydantic import BaseModel, Field

from config.settings import settings
from src.blackbox.api import BlackBoxApi
from src.data import TaskSpec
from src.evalkit.metrics import split_accuracy
from src.nets import MultiHeadClassifier, build_classifier
from src.utils.logger import setup_logger
from src.utils.seeding import seed_everything


logger = setup_logger(__name__)


class TrainingDivergence(FloatingPointError):
    """A training loss became non-finite."""


class TeacherHyperParams(BaseModel):
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0)


def train_teacher_model(
    task: TaskSpec,
    architecture_id: str,
    hyperparams: Optional[TeacherHyperParams] = None,
    seed: int = 0,
) -> Tuple[MultiHeadClassifier, float]:
    """Train a single-head classifier on the task's raw data; returns (model, validation accuracy)."""
    hyperparams = hyperparams or TeacherHyperParams()
    generator = seed_everything(seed)
    device = torch.device(settings.device)

    model = build_classifier(architecture_id, task.image_shape, [task.num_classes]).to(device)
    optimizer = torch.optim.SGD(model.parameters(), lr=hyperparams.lr, momentum=hyperparams.momentum)

    model.train()
    for epoch in range(1, hyperparams.epochs + 1):
        for step, (images, labels) in enumerate(task.train.loader(hyperparams.batch_size, shuffle=True, generator=generator)):
            loss = F.cross_entropy(model(images.to(device), 1), labels.to(device))
            if not math.isfinite(loss.item()):
                raise TrainingDivergence(
                    f"Teacher {architecture_id} on task {task.task_id}: non-finite loss "
                    f"{loss.item()} at epoch {epoch}, step {step}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        logger.debug(f"Teacher task {task.task_id} epoch {epoch}: last loss {loss.item():.4f}")

    eval_split = task.valid if len(task.valid) > 0 else task.train
    valid_acc = split_accuracy(model, eval_split, 1)
    logger.info(f"Trained {architecture_id} teacher for task {task.task_id}: validation accuracy {valid_acc:.4f}")
    return model.eval(), valid_acc


def train_teacher(
    task: TaskSpec,
    architecture_id: str,
    hyperparams: Optional[TeacherHyperParams] = None,
    seed: int = 0,
    budget: Optional[int] = None,
) -> BlackBoxApi:
    """Train a teacher and return it wrapped so that only `query` is exposed."""
    model, valid_acc = train_teacher_model(task, architecture_id, hyperparams, seed)
    api = BlackBoxApi(model, task.task_id, budget)
    api.validation_accuracy = valid_acc
    return api
