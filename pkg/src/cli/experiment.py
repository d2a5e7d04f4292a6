"""Experiment files: TOML sections validated into pydantic models."""

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, field_validator

from src.baselines import SupervisedConfig
from src.blackbox import TeacherHyperParams
from src.data import TaskStream, split_into_tasks
from src.trainer import TrainConfig


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration (exit code 2)."""


class DataConfig(BaseModel):
    dataset: str = "mnist"
    num_tasks: int = Field(5, ge=1)
    shuffle_classes: bool = False
    valid_fraction: float = Field(0.1, ge=0, lt=1)


class ApisConfig(TeacherHyperParams):
    """Teachers hidden behind the APIs. Architectures are cycled over the tasks."""

    architectures: List[str] = Field(default_factory=lambda: ["lenet"], min_length=1)
    isolate: bool = False

    def architecture_for(self, task_id: int) -> str:
        return self.architectures[(task_id - 1) % len(self.architectures)]


class RunConfig(BaseModel):
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    name: Optional[str] = None

    @field_validator("seeds")
    @classmethod
    def _unique(cls, seeds: List[int]) -> List[int]:
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"Duplicate seeds: {seeds}")
        return seeds


class ExperimentConfig(BaseModel):
    data: DataConfig = Field(default_factory=DataConfig)
    apis: ApisConfig = Field(default_factory=ApisConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    baselines: SupervisedConfig = Field(default_factory=SupervisedConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    def build_stream(self, seed: int) -> TaskStream:
        return split_into_tasks(
            self.data.dataset,
            self.data.num_tasks,
            seed,
            shuffle_classes=self.data.shuffle_classes,
            valid_fraction=self.data.valid_fraction,
        )

    def teacher_fingerprint(self) -> Dict[str, Any]:
        """Everything that determines the trained teachers (the registry key)."""
        return {"data": self.data.model_dump(), "apis": self.apis.model_dump(exclude={"isolate"})}

    def snapshot(self) -> Dict[str, Any]:
        return json.loads(self.model_dump_json())


def _parse_value(raw: str) -> Any:
    """TOML literal if it parses as one (numbers, booleans, arrays, quoted strings), else the bare string."""
    try:
        return tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply `section.key=value` assignments, e.g. `train.lambda_g=0.5` or `train.ablation.use_replay=false`."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like section.key=value, got {item!r}")
        path, raw = item.split("=", 1)
        keys = [k for k in path.strip().split(".") if k]
        if len(keys) < 2:
            raise ConfigError(f"Override key must name a section and a key, got {path!r}")
        node = document
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Override {path!r} descends into a non-table value")
        node[keys[-1]] = _parse_value(raw.strip())
    return document


def validate_experiment(document: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment configuration:\n{e}") from e


def load_experiment(
    path: Optional[Path],
    overrides: Sequence[str] = (),
    budget: Optional[str] = None,
) -> ExperimentConfig:
    """Read a TOML experiment file (or start from defaults), apply overrides, validate."""
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'rb') as f:
                document = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Experiment file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Malformed experiment file {path}: {e}") from e

    apply_overrides(document, overrides)
    if budget is not None:
        document.setdefault("train", {})["budget_per_task"] = budget
    return validate_experiment(document)
