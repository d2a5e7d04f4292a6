"""Class-disjoint task streams and stratified raw-data fractions."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import torch

from src.data.datasets import DatasetError, load_dataset
from src.utils.logger import setup_logger


logger = setup_logger(__name__)


@dataclass(frozen=True)
class Split:
    """Images in [-1, 1] with task-local labels."""

    images: torch.Tensor
    labels: torch.Tensor

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: torch.Tensor) -> "Split":
        return Split(self.images[indices], self.labels[indices])

    def loader(self, batch_size: int, shuffle: bool = False, generator: torch.Generator = None):
        dataset = torch.utils.data.TensorDataset(self.images, self.labels)
        return torch.utils.data.DataLoader(dataset, batch_size=batch_size, shuffle=shuffle, generator=generator)


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    class_labels: Tuple[int, ...]
    image_shape: Tuple[int, int, int]
    train: Split
    valid: Split
    test: Split

    @property
    def num_classes(self) -> int:
        return len(self.class_labels)

    @property
    def global_to_local(self) -> Dict[int, int]:
        return {c: i for i, c in enumerate(self.class_labels)}

    def to_global(self, local_labels: torch.Tensor) -> torch.Tensor:
        return torch.tensor(self.class_labels)[local_labels]

    def manifest(self) -> dict:
        return {
            "task_id": self.task_id,
            "class_labels": list(self.class_labels),
            "global_to_local": {str(k): v for k, v in self.global_to_local.items()},
            "sizes": {"train": len(self.train), "valid": len(self.valid), "test": len(self.test)},
        }


@dataclass(frozen=True)
class TaskStream:
    dataset_name: str
    seed: int
    tasks: List[TaskSpec] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.tasks)

    @property
    def C_per_task(self) -> int:
        return self.tasks[0].num_classes

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return self.tasks[0].image_shape

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: int) -> TaskSpec:
        return self.tasks[task_id - 1]

    def manifest(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "seed": self.seed,
            "num_tasks": self.K,
            "tasks": [t.manifest() for t in self.tasks],
        }

    def save_manifest(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.manifest(), f, indent=2)


def _select(images: torch.Tensor, labels: torch.Tensor, classes: Tuple[int, ...]) -> Split:
    lookup = {c: i for i, c in enumerate(classes)}
    mask = torch.isin(labels, torch.tensor(classes))
    local = torch.tensor([lookup[int(y)] for y in labels[mask]], dtype=torch.long)
    return Split(images[mask], local)


def split_into_tasks(
    dataset_name: str,
    num_tasks: int,
    seed: int,
    shuffle_classes: bool = False,
    valid_fraction: float = 0.1,
) -> TaskStream:
    """Split a dataset into `num_tasks` class-disjoint tasks.

    Classes are taken in ascending order unless `shuffle_classes` draws a
    seed-driven permutation. Each task gets `num_classes // num_tasks` classes;
    the remainder goes to the last task. A validation split is carved from
    each task's train split with a seeded permutation.
    """
    raw = load_dataset(dataset_name)
    classes = raw.classes
    if num_tasks < 1 or num_tasks > len(classes):
        raise DatasetError(f"Cannot split {len(classes)} classes of {dataset_name} into {num_tasks} tasks")

    gen = torch.Generator().manual_seed(seed)
    if shuffle_classes:
        classes = [classes[i] for i in torch.randperm(len(classes), generator=gen).tolist()]

    per_task = len(classes) // num_tasks
    tasks = []
    for k in range(num_tasks):
        end = (k + 1) * per_task if k < num_tasks - 1 else len(classes)
        task_classes = tuple(classes[k * per_task:end])

        full_train = _select(raw.train_images, raw.train_labels, task_classes)
        order = torch.randperm(len(full_train), generator=gen)
        n_valid = int(round(valid_fraction * len(full_train)))
        if len(full_train) - n_valid < 1:
            n_valid = 0
        valid = full_train.subset(order[:n_valid])
        train = full_train.subset(order[n_valid:])
        test = _select(raw.test_images, raw.test_labels, task_classes)

        tasks.append(TaskSpec(k + 1, task_classes, raw.image_shape, train, valid, test))

    logger.info(
        f"Split {dataset_name} into {num_tasks} tasks: "
        + ", ".join(str(list(t.class_labels)) for t in tasks)
    )
    return TaskStream(dataset_name, seed, tasks)


def sample_fraction(task: TaskSpec, fraction: float, seed: int) -> Split:
    """Class-stratified subset of the task's train split (DECL raw-data budget)."""
    if not 0.0 < fraction <= 1.0:
        raise DatasetError(f"Fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return task.train

    gen = torch.Generator().manual_seed(seed)
    picked = []
    for c in range(task.num_classes):
        idx = torch.nonzero(task.train.labels == c, as_tuple=True)[0]
        if len(idx) == 0:
            continue
        take = max(1, int(round(fraction * len(idx))))
        picked.append(idx[torch.randperm(len(idx), generator=gen)[:take]])
    indices = torch.cat(picked).sort().values
    return task.train.subset(indices)
