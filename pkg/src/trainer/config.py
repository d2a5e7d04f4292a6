"""Training configuration for continual distillation from APIs."""

import re
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from src.zograd import ZoConfig


_BUDGET_PATTERN = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kKmM]?)\s*$")


def parse_budget(value: Union[int, str, None]) -> Optional[int]:
    """Accept 12000, "12000", "12K" or "1.28M"."""
    if value is None or isinstance(value, int):
        return value
    match = _BUDGET_PATTERN.match(str(value))
    if not match:
        raise ValueError(f"Unreadable query budget: {value!r}")
    scale = {"": 1, "k": 1_000, "m": 1_000_000}[match.group(2).lower()]
    return int(round(float(match.group(1)) * scale))


class AblationConfig(BaseModel):
    """Switches for the four regularizing losses."""

    use_replay: bool = True
    use_similarity: bool = True
    use_diversity: bool = True
    use_balance: bool = True


class TrainConfig(BaseModel):
    setting: Literal["dfcl", "decl"] = "dfcl"
    fraction: Optional[float] = Field(None, gt=0, le=1)

    epochs: int = Field(10, ge=1)
    steps_per_epoch: int = Field(50, ge=1)
    batch_size: int = Field(32, ge=2)
    generator_steps: int = Field(1, ge=1)
    cl_steps: int = Field(4, ge=1)

    lambda_g: float = Field(1.0, ge=0)
    lambda_cl: float = Field(1.0, ge=0)

    cl_optimizer: Literal["sgd", "adam"] = "sgd"
    cl_lr: float = Field(0.01, gt=0)
    cl_momentum: float = Field(0.0, ge=0)
    generator_optimizer: Literal["adam", "sgd"] = "adam"
    generator_lr: float = Field(0.001, gt=0)

    cl_architecture: Optional[str] = None
    latent_dim: Optional[int] = Field(None, ge=1)

    zo: ZoConfig = Field(default_factory=ZoConfig)
    memory_capacity: int = Field(5000, ge=1)
    memory_batch_size: Optional[int] = Field(None, ge=1)
    ablation: AblationConfig = Field(default_factory=AblationConfig)

    budget_per_task: Optional[int] = Field(None, ge=1)
    early_stopping: bool = False
    patience: int = Field(3, ge=1)
    eval_batch_size: int = Field(256, ge=1)

    @field_validator("budget_per_task", mode="before")
    @classmethod
    def _parse_budget(cls, value):
        return parse_budget(value)

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.setting == "decl" and self.fraction is None:
            raise ValueError("setting 'decl' requires a raw-data `fraction`")
        if self.batch_size % 2:
            raise ValueError(f"batch_size must be even (half per generator), got {self.batch_size}")
        return self

    @property
    def replay_batch_size(self) -> int:
        return self.memory_batch_size or self.batch_size

    def generator_step_queries(self) -> int:
        """Two generators, each batch queried at the image and along every direction."""
        return 2 * self.batch_size * self.zo.queries_per_sample()

    def step_queries(self) -> int:
        return self.generator_steps * self.generator_step_queries() + self.cl_steps * self.batch_size

    def task_queries(self) -> int:
        """Training queries of one task: E * S * B * (4 N_G + N_fcl) for one direction."""
        return self.epochs * self.steps_per_epoch * self.step_queries()
