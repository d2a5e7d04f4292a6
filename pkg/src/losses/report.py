"""Per-update loss reports and the CSV training log."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional


LOSS_KEYS = ("L_G", "L_C", "L_B", "L_fcl", "L_M", "L_S", "total")
LOG_COLUMNS = ("step", "task", "epoch", "phase", "batch_size", "queries") + LOSS_KEYS


@dataclass
class LossReport:
    """Scalars of one optimizer update. Skipped terms are absent, never NaN."""

    task_id: int
    phase: str
    batch_size: int
    values: Dict[str, float] = field(default_factory=dict)
    epoch: int = 0
    step: int = 0
    queries: int = 0

    def __post_init__(self):
        for key, value in self.values.items():
            if key not in LOSS_KEYS:
                raise ValueError(f"Unknown loss key: {key}")
            if not math.isfinite(value):
                raise ValueError(f"Non-finite {key} = {value} (task {self.task_id}, {self.phase} update)")

    def get(self, key: str) -> Optional[float]:
        return self.values.get(key)

    def as_row(self) -> dict:
        row = {
            "step": self.step,
            "task": self.task_id,
            "epoch": self.epoch,
            "phase": self.phase,
            "batch_size": self.batch_size,
            "queries": self.queries,
        }
        for key in LOSS_KEYS:
            value = self.values.get(key)
            row[key] = "" if value is None else f"{value:.8g}"
        return row


class TrainingLog:
    """In-memory list of reports, mirrored to a CSV file when a path is given."""

    def __init__(self, path: Optional[Path] = None):
        self.path = path
        self.reports: List[LossReport] = []
        self.events: List[dict] = []
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            if not path.exists():
                with open(path, 'w', encoding='utf-8', newline='') as f:
                    csv.DictWriter(f, fieldnames=LOG_COLUMNS).writeheader()

    def append(self, report: LossReport) -> None:
        report.step = len(self.reports)
        self.reports.append(report)
        if self.path is not None:
            with open(self.path, 'a', encoding='utf-8', newline='') as f:
                csv.DictWriter(f, fieldnames=LOG_COLUMNS).writerow(report.as_row())

    def record_event(self, task_id: int, kind: str, **details) -> None:
        """Non-loss occurrences such as budget truncation or skipped steps."""
        self.events.append({"task": task_id, "event": kind, **details})

    def for_task(self, task_id: int) -> List[LossReport]:
        return [r for r in self.reports if r.task_id == task_id]


def read_training_log(path: Path) -> List[dict]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))
