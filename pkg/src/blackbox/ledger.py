"""Exact API query accounting with optional per-task budget enforcement."""

import json
import threading
from pathlib import Path
from typing import Dict, Iterable, Optional


GENERATOR_PHASE = "generator"
CL_PHASE = "cl"
MEMORY_PHASE = "memory"
EVAL_PHASE = "eval"
PHASES = (GENERATOR_PHASE, CL_PHASE, MEMORY_PHASE, EVAL_PHASE)

# Phases charged against the training budget.
TRAINING_PHASES = (GENERATOR_PHASE, CL_PHASE)


class BudgetExhausted(RuntimeError):
    """A query would exceed the enforced per-task budget."""


class QueryLedger:
    """Per-task query counters, one per phase. Updates are atomic."""

    def __init__(self, task_id: int, budget: Optional[int] = None):
        self.task_id = task_id
        self.budget = budget
        self._counts: Dict[str, int] = {phase: 0 for phase in PHASES}
        self._lock = threading.Lock()

    @property
    def total_queries(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    @property
    def training_queries(self) -> int:
        with self._lock:
            return sum(self._counts[p] for p in TRAINING_PHASES)

    def count(self, phase: str) -> int:
        with self._lock:
            return self._counts[phase]

    def remaining(self) -> Optional[int]:
        if self.budget is None:
            return None
        return max(0, self.budget - self.training_queries)

    def can_afford(self, n: int) -> bool:
        remaining = self.remaining()
        return remaining is None or n <= remaining

    def charge(self, n: int, phase: str) -> None:
        if phase not in self._counts:
            raise ValueError(f"Unknown query phase: {phase}")
        with self._lock:
            if self.budget is not None and phase in TRAINING_PHASES:
                used = sum(self._counts[p] for p in TRAINING_PHASES)
                if used + n > self.budget:
                    raise BudgetExhausted(
                        f"Task {self.task_id}: {n} queries requested, {self.budget - used} left of {self.budget}"
                    )
            self._counts[phase] += n

    def to_dict(self) -> dict:
        with self._lock:
            counts = dict(self._counts)
        return {
            "task_id": self.task_id,
            "budget": self.budget,
            "total": sum(counts.values()),
            "training": sum(counts[p] for p in TRAINING_PHASES),
            "phases": counts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QueryLedger":
        ledger = cls(data["task_id"], data.get("budget"))
        ledger._counts.update(data["phases"])
        return ledger


def export_ledgers(ledgers: Iterable[QueryLedger], path: Path) -> dict:
    """Write per-task, per-phase counts as JSON; returns the written document."""
    tasks = [ledger.to_dict() for ledger in ledgers]
    document = {
        "total_queries": sum(t["total"] for t in tasks),
        "training_queries": sum(t["training"] for t in tasks),
        "tasks": tasks,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2)
    return document
