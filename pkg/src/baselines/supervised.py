"""Raw-data baselines: Joint, Sequential and Classic (replay-based) CL."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import torch
import torch.nn.functional as F
from pydantic import BaseModel, Field
from tqdm import tqdm

from config.settings import settings
from src.blackbox import QueryLedger, TrainingDivergence
from src.data import TaskStream, sample_fraction
from src.evalkit import AccuracyMatrix, evaluate_row, metrics_summary
from src.memory import (
    CLASSIC,
    MemoryBuffer,
    MemoryEntry,
    RawSource,
    check_capacity,
    sample_minibatch,
    update_after_task,
)
from src.nets import MultiHeadClassifier, build_classifier
from src.utils.logger import setup_logger
from src.utils.seeding import seed_everything


logger = setup_logger(__name__)


class SupervisedConfig(BaseModel):
    """Hyperparameters shared by the baselines that see labelled raw data."""

    architecture: str = "lenet"
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(64, ge=1)
    lr: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0)
    fraction: float = Field(1.0, gt=0, le=1)
    memory_capacity: int = Field(5000, ge=1)
    replay_batch_size: int = Field(32, ge=0)
    eval_batch_size: int = Field(256, ge=1)


@dataclass
class BaselineResult:
    """Common result of every comparison method.

    Sequential methods fill `accuracy`; Joint and Models-Avg only have final
    accuracies, so their BWT is reported as N/A.
    """

    model: MultiHeadClassifier
    final_accuracies: List[float]
    accuracy: Optional[AccuracyMatrix] = None
    ledgers: List[QueryLedger] = field(default_factory=list)

    def summary(self) -> dict:
        if self.accuracy is not None:
            summary = metrics_summary(self.accuracy)
        else:
            acc = sum(self.final_accuracies) / len(self.final_accuracies)
            summary = {"acc": acc, "bwt": None, "acc_pct": 100.0 * acc, "bwt_pct": None, "matrix": None}
        summary["final_accuracies"] = list(self.final_accuracies)
        summary["queries_per_task"] = [ledger.training_queries for ledger in self.ledgers]
        summary["total_queries"] = sum(ledger.total_queries for ledger in self.ledgers)
        summary["truncated_tasks"] = []
        return summary


def _check_loss(loss: torch.Tensor, method: str, task_id: int, epoch: int) -> None:
    if not math.isfinite(loss.item()):
        raise TrainingDivergence(f"{method}: non-finite loss {loss.item()} on task {task_id}, epoch {epoch}")


def _routed_cross_entropy(model: MultiHeadClassifier, images, labels, task_ids) -> torch.Tensor:
    """Mean cross-entropy over a batch whose samples belong to different heads."""
    total = 0.0
    for task_id in sorted(set(task_ids.tolist())):
        mask = task_ids == task_id
        logits = model(images[mask], int(task_id))
        total = total + F.cross_entropy(logits, labels[mask], reduction="sum")
    return total / len(labels)


def _replay_loss(model: MultiHeadClassifier, entries: Sequence[MemoryEntry], device) -> torch.Tensor:
    """Cross-entropy of stored raw samples against their ground-truth labels, per task head."""
    images = torch.stack([e.image for e in entries]).to(device)
    labels = torch.tensor([e.label for e in entries], dtype=torch.long, device=device)
    task_ids = torch.tensor([e.task_id for e in entries], device=device)
    return _routed_cross_entropy(model, images, labels, task_ids)


def _new_model(stream: TaskStream, cfg: SupervisedConfig, device) -> MultiHeadClassifier:
    return build_classifier(cfg.architecture, stream.image_shape).to(device)


def run_joint(stream: TaskStream, cfg: Optional[SupervisedConfig] = None, seed: int = 0) -> BaselineResult:
    """All tasks' raw data at once; each sample trains its own task's head."""
    cfg = cfg or SupervisedConfig()
    rng = seed_everything(seed)
    device = torch.device(settings.device)
    model = _new_model(stream, cfg, device)
    for task in stream:
        model.add_head(task.num_classes)

    images = torch.cat([task.train.images for task in stream])
    labels = torch.cat([task.train.labels for task in stream])
    task_ids = torch.cat([torch.full((len(task.train),), task.task_id) for task in stream])
    loader = torch.utils.data.DataLoader(
        torch.utils.data.TensorDataset(images, labels, task_ids),
        batch_size=cfg.batch_size, shuffle=True, generator=rng,
    )
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum)

    model.train()
    for epoch in tqdm(range(1, cfg.epochs + 1), desc="joint", leave=False):
        for x, y, t in loader:
            loss = _routed_cross_entropy(model, x.to(device), y.to(device), t.to(device))
            _check_loss(loss, "joint", 0, epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

    final = evaluate_row(model, list(stream), cfg.eval_batch_size)
    logger.info(f"Joint training done: accuracies {[round(a, 4) for a in final]}")
    return BaselineResult(model, final)


def _train_sequentially(
    stream: TaskStream,
    cfg: SupervisedConfig,
    seed: int,
    replay: bool,
    method: str,
) -> BaselineResult:
    rng = seed_everything(seed)
    device = torch.device(settings.device)
    model = _new_model(stream, cfg, device)
    memory = MemoryBuffer(cfg.memory_capacity)
    accuracy = AccuracyMatrix()
    use_replay = replay and cfg.replay_batch_size > 0
    if use_replay:
        check_capacity(cfg.memory_capacity, stream.K)

    for task in stream:
        model.add_head(task.num_classes)
        train_split = sample_fraction(task, cfg.fraction, seed) if cfg.fraction < 1.0 else task.train
        optimizer = torch.optim.SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum)

        model.train()
        for epoch in tqdm(range(1, cfg.epochs + 1), desc=f"{method} task {task.task_id}", leave=False):
            for x, y in train_split.loader(cfg.batch_size, shuffle=True, generator=rng):
                loss = F.cross_entropy(model(x.to(device), task.task_id), y.to(device))
                if use_replay and len(memory) > 0:
                    loss = loss + _replay_loss(model, sample_minibatch(memory, cfg.replay_batch_size, rng), device)
                _check_loss(loss, method, task.task_id, epoch)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

        if use_replay:
            update_after_task(memory, CLASSIC, task.task_id, RawSource(train_split, None, cfg.eval_batch_size, rng))
        row = evaluate_row(model, stream.tasks[:task.task_id], cfg.eval_batch_size)
        accuracy.append_row(row)
        logger.info(f"{method} task {task.task_id} done: accuracies {[round(a, 4) for a in row]}")

    return BaselineResult(model, accuracy.rows[-1], accuracy)


def run_sequential(stream: TaskStream, cfg: Optional[SupervisedConfig] = None, seed: int = 0) -> BaselineResult:
    """Fine-tune task after task on raw data with no protection against forgetting."""
    return _train_sequentially(stream, cfg or SupervisedConfig(), seed, replay=False, method="sequential")


def run_classic_cl(
    stream: TaskStream,
    cfg: Optional[SupervisedConfig] = None,
    seed: int = 0,
    raw_fraction: Optional[float] = None,
) -> BaselineResult:
    """Experience replay on raw data (full or a stratified fraction) with the shared memory policy."""
    cfg = cfg or SupervisedConfig()
    if raw_fraction is not None:
        cfg = SupervisedConfig.model_validate({**cfg.model_dump(), "fraction": raw_fraction})
    return _train_sequentially(stream, cfg, seed, replay=True, method="classic")
