"""Run directory layout and task-boundary checkpoints."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import torch

from src.blackbox import export_ledgers
from src.evalkit import AccuracyMatrix
from src.media.sample_grid import save_sample_grid
from src.memory import MemoryBuffer
from src.nets import load_classifier, save_classifier, save_generators
from src.utils.logger import setup_logger
from src.utils.seeding import capture_rng_state


logger = setup_logger(__name__)


class RunArtifacts:
    """Everything one (method, seed) run writes:

    config.json, manifest.json, losses.csv, accuracy.csv / accuracy.json,
    ledger.json, events.json, result.json, samples/task_<k>.png and
    checkpoints/task_<k>/{model,generators,memory,state}.pt
    """

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)

    @property
    def config_path(self) -> Path:
        return self.run_dir / "config.json"

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / "manifest.json"

    @property
    def losses_path(self) -> Path:
        return self.run_dir / "losses.csv"

    @property
    def ledger_path(self) -> Path:
        return self.run_dir / "ledger.json"

    @property
    def result_path(self) -> Path:
        return self.run_dir / "result.json"

    @property
    def model_path(self) -> Path:
        return self.run_dir / "model.pt"

    def checkpoint_dir(self, task_id: int) -> Path:
        return self.run_dir / "checkpoints" / f"task_{task_id}"

    def write_json(self, path: Path, data: Any) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)

    def read_json(self, path: Path) -> Any:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def write_config(self, config: Dict[str, Any]) -> None:
        self.write_json(self.config_path, config)

    def write_accuracy(self, accuracy: AccuracyMatrix) -> None:
        accuracy.save(self.run_dir / "accuracy.json")
        accuracy.to_csv(self.run_dir / "accuracy.csv")

    def write_ledgers(self, ledgers) -> dict:
        return export_ledgers(ledgers, self.ledger_path)

    def write_result(self, result: Dict[str, Any]) -> None:
        self.write_json(self.result_path, result)

    def save_samples(self, state, task_id: int, count: int = 32) -> None:
        if state.generators is None:
            return
        # Own generator: drawing from the run's RNGs would shift every later task.
        preview_rng = torch.Generator().manual_seed(task_id)
        state.generators.eval()
        with torch.no_grad():
            z = state.generators.gen_a.sample_latent(count // 2, preview_rng, state.device)
            imgs_a, imgs_b = state.generators(z)
        state.generators.train()
        save_sample_grid(imgs_a, imgs_b, self.run_dir / "samples" / f"task_{task_id}.png")

    def save_task_checkpoint(self, state) -> None:
        """Persist f_cl, generators, memory and resumable state at a task boundary."""
        directory = self.checkpoint_dir(state.task_id)
        save_classifier(state.model, directory / "model.pt", {"task_id": state.task_id})
        if state.generators is not None:
            save_generators(state.generators, directory / "generators.pt")
        state.memory.save(directory / "memory.pt")
        torch.save(
            {
                "task_id": state.task_id,
                "accuracy": state.accuracy.to_dict(),
                "ledgers": [ledger.to_dict() for ledger in state.ledgers],
                "truncated_tasks": list(state.truncated_tasks),
                "events": state.log.events,
                "rng": capture_rng_state(state.rng),
            },
            directory / "state.pt",
        )
        logger.info(f"Checkpoint for task {state.task_id} written to {directory}")

    def latest_checkpoint(self) -> Optional[int]:
        root = self.run_dir / "checkpoints"
        if not root.exists():
            return None
        finished = [
            int(d.name.split("_")[1]) for d in root.iterdir()
            if d.is_dir() and (d / "state.pt").exists()
        ]
        return max(finished) if finished else None

    def load_task_checkpoint(self, task_id: int) -> Dict[str, Any]:
        directory = self.checkpoint_dir(task_id)
        data = torch.load(directory / "state.pt", map_location="cpu", weights_only=False)
        data["model"] = load_classifier(directory / "model.pt")
        data["memory"] = MemoryBuffer.load(directory / "memory.pt")
        data["accuracy"] = AccuracyMatrix.from_dict(data["accuracy"])
        return data
