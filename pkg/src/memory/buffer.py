"""Capacity-bounded replay memory with equal per-task allocation and FIFO eviction."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import torch

from src.blackbox import MEMORY_PHASE, QueryApi
from src.data import Split
from src.nets import GeneratorPair
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

GENERATED = "generated"
RAW = "raw"

DFCL = "dfcl"
DECL = "decl"
CLASSIC = "classic"

SETTING_ORIGINS = {DFCL: GENERATED, DECL: RAW, CLASSIC: RAW}


class MemoryBufferError(ValueError):
    """Sampling from an empty buffer or filling from an empty source."""


@dataclass
class MemoryEntry:
    image: torch.Tensor
    logits: Optional[torch.Tensor]
    task_id: int
    origin: str
    label: Optional[int] = None


class GeneratedSource:
    """Fresh samples from the task's generator pair, labelled by the task's API."""

    def __init__(self, generators: GeneratorPair, api: QueryApi, batch_size: int, rng: Optional[torch.Generator] = None):
        self.generators = generators
        self.api = api
        self.batch_size = batch_size
        self.rng = rng

    @torch.no_grad()
    def draw(self, n: int, task_id: int) -> List[MemoryEntry]:
        device = next(self.generators.parameters()).device
        entries = []
        while len(entries) < n:
            take = min(self.batch_size, n - len(entries))
            # at least two latents: the generators may still be in train mode (batch statistics)
            z = self.generators.gen_a.sample_latent(max(2, (take + 1) // 2), self.rng, device)
            imgs_a, imgs_b = self.generators(z)
            # Interleave so a truncated batch stays balanced between G_A and G_B.
            images = torch.stack([imgs_a, imgs_b], dim=1).reshape(-1, *imgs_a.shape[1:])[:take]
            logits = self.api.query(images, phase=MEMORY_PHASE)
            entries.extend(
                MemoryEntry(img.cpu(), lg.cpu(), task_id, GENERATED) for img, lg in zip(images, logits)
            )
        return entries


class RawSource:
    """Raw task images; labelled by the API (DECL) or by their ground truth (classic replay)."""

    def __init__(self, raw: Split, api: Optional[QueryApi] = None, batch_size: int = 256, rng: Optional[torch.Generator] = None):
        self.raw = raw
        self.api = api
        self.batch_size = batch_size
        self.rng = rng

    @torch.no_grad()
    def draw(self, n: int, task_id: int) -> List[MemoryEntry]:
        if len(self.raw) == 0:
            raise MemoryBufferError(f"Task {task_id}: raw data source is empty")
        order = torch.randperm(len(self.raw), generator=self.rng)[:n]
        picked = self.raw.subset(order)
        entries = []
        for start in range(0, len(picked), self.batch_size):
            images = picked.images[start:start + self.batch_size]
            labels = picked.labels[start:start + self.batch_size]
            logits = self.api.query(images, phase=MEMORY_PHASE) if self.api is not None else [None] * len(images)
            entries.extend(
                MemoryEntry(img, None if lg is None else lg.cpu(), task_id, RAW, int(y))
                for img, lg, y in zip(images, logits, labels)
            )
        return entries


class MemoryBuffer:
    """Replay buffer holding at most `capacity` entries, grouped by task in insertion order."""

    def __init__(self, capacity: int = 5000):
        if capacity < 1:
            raise MemoryBufferError(f"Capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._entries: Dict[int, List[MemoryEntry]] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    @property
    def task_ids(self) -> List[int]:
        return sorted(self._entries)

    def per_task_counts(self) -> Dict[int, int]:
        return {k: len(v) for k, v in sorted(self._entries.items())}

    def entries(self, task_id: Optional[int] = None) -> List[MemoryEntry]:
        if task_id is not None:
            return list(self._entries.get(task_id, []))
        return [e for k in self.task_ids for e in self._entries[k]]

    def quota(self, num_tasks: int) -> int:
        return self.capacity // num_tasks

    def rebalance(self, num_tasks: int) -> None:
        """Evict the oldest surplus of every task down to the per-task quota."""
        quota = self.quota(num_tasks)
        for task_id, entries in self._entries.items():
            if len(entries) > quota:
                self._entries[task_id] = entries[len(entries) - quota:]

    def add_task(self, task_id: int, entries: List[MemoryEntry]) -> None:
        num_tasks = len(set(self._entries) | {task_id})
        self.rebalance(num_tasks)
        self._entries[task_id] = list(entries)[:self.quota(num_tasks)]

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {}
        for task_id, entries in self._entries.items():
            has_logits = entries and entries[0].logits is not None
            payload[task_id] = {
                "images": torch.stack([e.image for e in entries]) if entries else None,
                "logits": [e.logits for e in entries] if has_logits else None,
                "labels": [e.label for e in entries],
                "origin": entries[0].origin if entries else RAW,
            }
        torch.save({"capacity": self.capacity, "tasks": payload}, path)

    @classmethod
    def load(cls, path: Path) -> "MemoryBuffer":
        data = torch.load(path, map_location="cpu", weights_only=False)
        buffer = cls(data["capacity"])
        for task_id, stored in data["tasks"].items():
            images = stored["images"] if stored["images"] is not None else []
            logits = stored["logits"] or [None] * len(images)
            buffer._entries[int(task_id)] = [
                MemoryEntry(img, lg, int(task_id), stored["origin"], label)
                for img, lg, label in zip(images, logits, stored["labels"])
            ]
        return buffer


def check_capacity(capacity: int, num_tasks: int) -> None:
    """Every task of the stream needs at least one slot under the floor allocation."""
    if capacity < num_tasks:
        raise MemoryBufferError(
            f"Memory capacity {capacity} is smaller than the {num_tasks} tasks of the stream; "
            f"the last tasks would get no slots"
        )


def update_after_task(buffer: MemoryBuffer, setting: str, task_id: int, source) -> MemoryBuffer:
    """Rebalance to capacity // tasks_so_far slots per task and fill the new task's share."""
    expected = SETTING_ORIGINS.get(setting)
    if expected is None:
        raise MemoryBufferError(f"Unknown memory setting: {setting}")
    if expected == GENERATED and not isinstance(source, GeneratedSource):
        raise MemoryBufferError(f"{setting} memory must be filled from generated samples")
    if expected == RAW and not isinstance(source, RawSource):
        raise MemoryBufferError(f"{setting} memory must be filled from raw samples")

    num_tasks = len(set(buffer.task_ids) | {task_id})
    quota = buffer.quota(num_tasks)
    buffer.add_task(task_id, source.draw(quota, task_id))
    logger.info(f"Memory after task {task_id} ({setting}): {buffer.per_task_counts()} of {buffer.capacity}")
    return buffer


def sample_minibatch(buffer: MemoryBuffer, size: int, generator: Optional[torch.Generator] = None) -> List[MemoryEntry]:
    """Uniform sample across all tasks; without replacement unless `size` exceeds the buffer."""
    entries = buffer.entries()
    if not entries:
        raise MemoryBufferError("Cannot sample from an empty memory buffer")
    if size <= len(entries):
        indices = torch.randperm(len(entries), generator=generator)[:size]
    else:
        indices = torch.randint(len(entries), (size,), generator=generator)
    return [entries[i] for i in indices.tolist()]
