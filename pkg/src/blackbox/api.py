"""Query-only classification endpoints."""

from pathlib import Path
from typing import Optional, Tuple

import torch

from src.blackbox.ledger import CL_PHASE, QueryLedger
from src.nets import MultiHeadClassifier, load_classifier


class QueryApi:
    """What a continual learner may see of a task's teacher: metadata, a ledger and `query`."""

    def __init__(self, task_id: int, num_classes: int, image_shape: Tuple[int, int, int], budget: Optional[int] = None):
        self.task_id = task_id
        self.num_classes = num_classes
        self.image_shape = tuple(image_shape)
        self.ledger = QueryLedger(task_id, budget)
        self.validation_accuracy: Optional[float] = None

    def _check_batch(self, x_batch: torch.Tensor) -> None:
        if x_batch.dim() != 4 or tuple(x_batch.shape[1:]) != self.image_shape:
            raise ValueError(f"API {self.task_id} expects N x {self.image_shape} images, got {tuple(x_batch.shape)}")

    def query(self, x_batch: torch.Tensor, phase: str = CL_PHASE) -> torch.Tensor:
        raise NotImplementedError


class BlackBoxApi(QueryApi):
    """In-process API around a frozen teacher. One query per image; logits carry no graph."""

    def __init__(self, teacher: MultiHeadClassifier, task_id: int, budget: Optional[int] = None):
        super().__init__(task_id, teacher.head_sizes[0], teacher.image_shape, budget)
        self.__teacher = teacher.eval()
        for p in self.__teacher.parameters():
            p.requires_grad_(False)

    @classmethod
    def from_checkpoint(cls, path: Path, task_id: int, budget: Optional[int] = None) -> "BlackBoxApi":
        return cls(load_classifier(path), task_id, budget)

    def query(self, x_batch: torch.Tensor, phase: str = CL_PHASE) -> torch.Tensor:
        self._check_batch(x_batch)
        self.ledger.charge(len(x_batch), phase)
        device = next(self.__teacher.parameters()).device
        with torch.no_grad():
            logits = self.__teacher(x_batch.detach().to(device), 1)
        return logits.detach().to(x_batch.device)


class WhiteBoxTeacher(QueryApi):
    """Teacher with parameter access; gradients may flow through it to the input. Unmetered."""

    def __init__(self, teacher: MultiHeadClassifier, task_id: int):
        super().__init__(task_id, teacher.head_sizes[0], teacher.image_shape)
        self.model = teacher.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)

    def query(self, x_batch: torch.Tensor, phase: str = CL_PHASE) -> torch.Tensor:
        self._check_batch(x_batch)
        with torch.no_grad():
            return self.model(x_batch, 1)

    def logits_with_grad(self, x_batch: torch.Tensor) -> torch.Tensor:
        self._check_batch(x_batch)
        return self.model(x_batch, 1)
