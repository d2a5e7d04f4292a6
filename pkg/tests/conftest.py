import os

import pytest
import torch

from config.settings import settings
from src.blackbox import BlackBoxApi, TeacherHyperParams, train_teacher_model
from src.data import split_into_tasks
from src.trainer import TrainConfig

SYNTHETIC = "synthetic-4-class-12px"


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DFCL_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="desk-scale run; set DFCL_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """Every test writes runs and teachers under its own tmp dir."""
    monkeypatch.setattr(settings, "output_dir", str(tmp_path / "output"))
    return tmp_path / "output"


@pytest.fixture(scope="session")
def stream():
    return split_into_tasks(SYNTHETIC, 2, seed=0)


@pytest.fixture(scope="session")
def teachers(stream):
    """One trained tiny-cnn teacher per task, shared across the session (treat as read-only)."""
    hyperparams = TeacherHyperParams(epochs=5, batch_size=32, lr=0.05)
    return [train_teacher_model(task, "tiny-cnn", hyperparams, seed=task.task_id)[0] for task in stream]


@pytest.fixture
def make_apis(teachers):
    """Fresh APIs (with zeroed ledgers) around the session teachers."""
    def factory(budget=None):
        return [BlackBoxApi(teacher, k, budget) for k, teacher in enumerate(teachers, start=1)]
    return factory


@pytest.fixture
def tiny_cfg():
    return TrainConfig(
        epochs=1,
        steps_per_epoch=3,
        batch_size=8,
        cl_architecture="tiny-cnn",
        latent_dim=16,
        memory_capacity=40,
        eval_batch_size=64,
    )


@pytest.fixture
def rng():
    return torch.Generator().manual_seed(0)
