"""On-disk registry of trained teachers, keyed by the configuration that produced them."""

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.settings import settings
from src.blackbox import train_teacher_model
from src.cli.experiment import ExperimentConfig
from src.nets import save_classifier
from src.utils.logger import setup_logger


logger = setup_logger(__name__)


def teacher_seed(seed: int, task_id: int) -> int:
    """Each (run seed, task) pair trains its teacher from its own seed."""
    return 1000 * seed + task_id


class TeacherRegistry:
    """Teachers of one configuration: `<teachers_dir>/<dataset>-<hash>/index.json` plus checkpoints."""

    def __init__(self, experiment: ExperimentConfig, root: Optional[Path] = None):
        self.experiment = experiment
        fingerprint = json.dumps(experiment.teacher_fingerprint(), sort_keys=True)
        digest = hashlib.sha1(fingerprint.encode('utf-8')).hexdigest()[:10]
        self.registry_dir = Path(root or settings.teachers_dir) / f"{experiment.data.dataset}-{digest}"
        self.registry_dir.mkdir(parents=True, exist_ok=True)

    def _index_path(self) -> Path:
        return self.registry_dir / "index.json"

    def _load_index(self) -> Dict[str, Any]:
        path = self._index_path()
        if path.exists():
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    return json.load(f)
            except Exception as e:
                logger.error(f"Failed to load teacher index {path}: {e}")
        return {"fingerprint": self.experiment.teacher_fingerprint(), "teachers": {}}

    def _save_index(self, index: Dict[str, Any]):
        with open(self._index_path(), 'w', encoding='utf-8') as f:
            json.dump(index, f, indent=2, ensure_ascii=False)

    @staticmethod
    def _key(seed: int, task_id: int) -> str:
        return f"seed_{seed}/task_{task_id}"

    def checkpoint_path(self, seed: int, task_id: int) -> Path:
        return self.registry_dir / f"seed_{seed}" / f"task_{task_id}.pt"

    def lookup(self, seed: int, task_id: int) -> Optional[Dict[str, Any]]:
        """Registry entry of a teacher whose checkpoint still exists, else None."""
        entry = self._load_index()["teachers"].get(self._key(seed, task_id))
        if entry is None or not Path(entry["path"]).exists():
            return None
        return entry

    def entries(self, seed: int) -> List[Optional[Dict[str, Any]]]:
        return [self.lookup(seed, k) for k in range(1, self.experiment.data.num_tasks + 1)]

    def ensure_teachers(self, seed: int) -> List[Dict[str, Any]]:
        """Train and register every missing teacher of `seed`; existing ones are reused."""
        stream = self.experiment.build_stream(seed)
        entries = []
        for task in stream:
            entry = self.lookup(seed, task.task_id)
            if entry is not None:
                logger.info(f"Teacher for task {task.task_id}, seed {seed} found in registry ({entry['architecture_id']})")
                entries.append(entry)
                continue

            architecture = self.experiment.apis.architecture_for(task.task_id)
            model, valid_acc = train_teacher_model(
                task, architecture, self.experiment.apis, teacher_seed(seed, task.task_id)
            )
            path = self.checkpoint_path(seed, task.task_id)
            save_classifier(model, path, {"task_id": task.task_id, "seed": seed, "classes": list(task.class_labels)})
            entry = {
                "task_id": task.task_id,
                "seed": seed,
                "architecture_id": architecture,
                "classes": list(task.class_labels),
                "validation_accuracy": valid_acc,
                "path": str(path),
                "created_at": datetime.now().isoformat(),
            }
            index = self._load_index()
            index["teachers"][self._key(seed, task.task_id)] = entry
            self._save_index(index)
            entries.append(entry)
        return entries
