"""Accuracy matrix and the ACC / BWT metrics."""

import csv
import json
from pathlib import Path
from typing import List, Optional

import torch

from src.data import Split, TaskSpec
from src.nets import MultiHeadClassifier


class AccuracyMatrix:
    """Lower-triangular K x K matrix; row k holds accuracies on tasks 1..k after training task k."""

    def __init__(self, rows: Optional[List[List[float]]] = None):
        self.rows: List[List[float]] = []
        for row in rows or []:
            self.append_row(row)

    @property
    def K(self) -> int:
        return len(self.rows)

    def append_row(self, row: List[float]) -> None:
        if len(row) != len(self.rows) + 1:
            raise ValueError(f"Row {len(self.rows) + 1} must have {len(self.rows) + 1} entries, got {len(row)}")
        if any(not 0.0 <= a <= 1.0 for a in row):
            raise ValueError(f"Accuracies must lie in [0, 1]: {row}")
        self.rows.append([float(a) for a in row])

    def __getitem__(self, index) -> float:
        k, i = index
        if i > k:
            raise IndexError(f"A[{k},{i}] is undefined (upper triangle)")
        return self.rows[k - 1][i - 1]

    def to_dict(self) -> dict:
        return {"K": self.K, "rows": self.rows}

    @classmethod
    def from_dict(cls, data: dict) -> "AccuracyMatrix":
        return cls(data["rows"])

    def to_csv(self, path: Path) -> None:
        """Per-stage accuracy table: one row per training stage, blanks above the diagonal."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(["after_task"] + [f"task_{i}" for i in range(1, self.K + 1)])
            for k, row in enumerate(self.rows, start=1):
                writer.writerow([k] + [f"{a:.6f}" for a in row] + [""] * (self.K - k))

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: Path) -> "AccuracyMatrix":
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))


def acc_metric(m: AccuracyMatrix) -> float:
    """Mean of the last row."""
    if m.K < 1:
        raise ValueError("ACC needs at least one completed task")
    last = m.rows[-1]
    return sum(last) / len(last)


def bwt_metric(m: AccuracyMatrix) -> Optional[float]:
    """Mean of A[K,i] - A[i,i] over i < K; None (reported as N/A) when K = 1."""
    if m.K < 2:
        return None
    K = m.K
    return sum(m[K, i] - m[i, i] for i in range(1, K)) / (K - 1)


def metrics_summary(m: AccuracyMatrix) -> dict:
    acc = acc_metric(m)
    bwt = bwt_metric(m)
    return {
        "acc": acc,
        "bwt": bwt,
        "acc_pct": 100.0 * acc,
        "bwt_pct": None if bwt is None else 100.0 * bwt,
        "matrix": m.to_dict(),
    }


@torch.no_grad()
def split_accuracy(model: MultiHeadClassifier, split: Split, task_id: int, batch_size: int = 256) -> float:
    """Top-1 accuracy of head `task_id` on a split with task-local labels."""
    if len(split) == 0:
        return 0.0
    model.head(task_id)
    was_training = model.training
    model.eval()
    device = next(model.parameters()).device
    correct = 0
    for images, labels in split.loader(batch_size):
        preds = model(images.to(device), task_id).argmax(dim=1).cpu()
        correct += int((preds == labels).sum())
    model.train(was_training)
    return correct / len(split)


def evaluate_task(model: MultiHeadClassifier, task: TaskSpec, task_id: int, batch_size: int = 256) -> float:
    """Test-split accuracy using head `task_id`; never touches an API."""
    return split_accuracy(model, task.test, task_id, batch_size)


def evaluate_row(model: MultiHeadClassifier, tasks: List[TaskSpec], batch_size: int = 256) -> List[float]:
    """Accuracies on tasks 1..k for one accuracy-matrix row."""
    return [evaluate_task(model, task, task.task_id, batch_size) for task in tasks]
