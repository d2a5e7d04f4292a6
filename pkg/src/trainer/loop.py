"""Per-task training and the full task-stream run."""

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import torch
from tqdm import tqdm

from config.settings import settings
from src.blackbox import QueryApi, QueryLedger, WhiteBoxTeacher
from src.data import TaskStream, default_latent_dim, sample_fraction
from src.evalkit import AccuracyMatrix, evaluate_row, metrics_summary, split_accuracy
from src.losses import TrainingLog
from src.memory import DFCL, GeneratedSource, RawSource, check_capacity, update_after_task
from src.nets import MultiHeadClassifier, build_classifier, frozen_copy, save_classifier
from src.trainer.artifacts import RunArtifacts
from src.trainer.config import TrainConfig
from src.trainer.state import RunState, begin_task
from src.trainer.steps import cl_step, generator_step
from src.utils.logger import setup_logger
from src.utils.seeding import restore_rng_state, seed_everything


logger = setup_logger(__name__)


@dataclass
class RunResult:
    model: MultiHeadClassifier
    accuracy: AccuracyMatrix
    ledgers: List[QueryLedger]
    log: TrainingLog
    truncated_tasks: List[int]

    def summary(self) -> dict:
        training = [ledger.training_queries for ledger in self.ledgers]
        return {
            **metrics_summary(self.accuracy),
            "queries_per_task": training,
            "total_queries": sum(ledger.total_queries for ledger in self.ledgers),
            "truncated_tasks": self.truncated_tasks,
        }


def _fill_memory(state: RunState, api: QueryApi) -> None:
    cfg = state.cfg
    if cfg.setting == DFCL:
        source = GeneratedSource(state.generators, api, cfg.batch_size, state.rng)
    else:
        raw = sample_fraction(state.task, cfg.fraction, state.seed)
        source = RawSource(raw, api, cfg.batch_size, state.rng)
    update_after_task(state.memory, cfg.setting, state.task_id, source)


def train_task(state: RunState, api: QueryApi, cfg: Optional[TrainConfig] = None) -> RunState:
    """E epochs of S steps (N_G generator updates, then N_fcl CL updates), then memory update,
    snapshot and one accuracy-matrix row."""
    cfg = cfg or state.cfg
    k = state.task_id
    if api.task_id != k:
        raise ValueError(f"API for task {api.task_id} offered while training task {k}")

    step_cost = cfg.step_queries()
    best_valid, best_state, stale_epochs = -1.0, None, 0
    truncated = False

    for epoch in tqdm(range(1, cfg.epochs + 1), desc=f"task {k}", leave=False):
        state.epoch = epoch
        for step in range(cfg.steps_per_epoch):
            if not api.ledger.can_afford(step_cost):
                truncated = True
                logger.info(
                    f"Task {k}: query budget reached at epoch {epoch}, step {step} "
                    f"({api.ledger.training_queries} of {api.ledger.budget} used)"
                )
                state.log.record_event(k, "budget_truncation", epoch=epoch, step=step,
                                       queries=api.ledger.training_queries)
                break
            for _ in range(cfg.generator_steps):
                generator_step(state, api)
            for _ in range(cfg.cl_steps):
                cl_step(state, api)
        if truncated:
            break

        if cfg.early_stopping and len(state.task.valid) > 0:
            valid_acc = split_accuracy(state.model, state.task.valid, k, cfg.eval_batch_size)
            if valid_acc > best_valid:
                best_valid, best_state, stale_epochs = valid_acc, copy.deepcopy(state.model.state_dict()), 0
            else:
                stale_epochs += 1
                if stale_epochs >= cfg.patience:
                    logger.info(f"Task {k}: early stopping after epoch {epoch} (best validation {best_valid:.4f})")
                    state.log.record_event(k, "early_stop", epoch=epoch, best_valid=best_valid)
                    break

    if best_state is not None:
        state.model.load_state_dict(best_state)
    if truncated:
        state.truncated_tasks.append(k)

    _fill_memory(state, api)
    state.snapshot = frozen_copy(state.model)

    row = evaluate_row(state.model, state.tasks[:k], cfg.eval_batch_size)
    state.accuracy.append_row(row)
    logger.info(f"Task {k} done: accuracies {[round(a, 4) for a in row]}, training queries {api.ledger.training_queries}")
    return state


def new_run_state(stream: TaskStream, cfg: TrainConfig, seed: int, log_path: Optional[Path] = None) -> RunState:
    rng = seed_everything(seed)
    device = torch.device(settings.device)
    architecture = cfg.cl_architecture or "lenet"
    model = build_classifier(architecture, stream.image_shape).to(device)
    return RunState(
        cfg=cfg,
        model=model,
        tasks=list(stream.tasks),
        rng=rng,
        latent_dim=cfg.latent_dim or default_latent_dim(stream.dataset_name),
        seed=seed,
        device=device,
        log=TrainingLog(log_path),
    )


def _resume(state: RunState, artifacts: RunArtifacts, apis: Sequence[QueryApi]) -> int:
    last = artifacts.latest_checkpoint()
    if last is None:
        return 0
    data = artifacts.load_task_checkpoint(last)
    state.model = data["model"].to(state.device)
    state.memory = data["memory"]
    state.accuracy = data["accuracy"]
    state.truncated_tasks = list(data["truncated_tasks"])
    state.log.events = list(data["events"])
    state.snapshot = frozen_copy(state.model)
    state.task_id = last
    for stored, api in zip(data["ledgers"], apis):
        api.ledger = QueryLedger.from_dict({**stored, "budget": api.ledger.budget})
    state.ledgers = [api.ledger for api in apis[:last]]
    restore_rng_state(data["rng"], state.rng)
    logger.info(f"Resumed run from task {last} checkpoint")
    return last


def run_stream(
    stream: TaskStream,
    apis: Sequence[QueryApi],
    cfg: TrainConfig,
    seed: int = 0,
    run_dir: Optional[Path] = None,
    resume: bool = False,
) -> RunResult:
    """Learn the whole API stream; one head per task, artifacts persisted when `run_dir` is given."""
    if len(apis) != stream.K:
        raise ValueError(f"Stream has {stream.K} tasks but {len(apis)} APIs were given")
    for k, api in enumerate(apis, start=1):
        if api.task_id != k:
            raise ValueError(f"APIs must be ordered by task id; position {k} holds task {api.task_id}")
        if cfg.budget_per_task is not None and not isinstance(api, WhiteBoxTeacher):
            api.ledger.budget = cfg.budget_per_task
    check_capacity(cfg.memory_capacity, stream.K)

    artifacts = RunArtifacts(run_dir) if run_dir is not None else None
    state = new_run_state(stream, cfg, seed, artifacts.losses_path if artifacts else None)
    if artifacts is not None:
        artifacts.write_config(cfg.model_dump())
        stream.save_manifest(artifacts.manifest_path)

    start = _resume(state, artifacts, apis) if (resume and artifacts is not None) else 0

    for api in apis[start:]:
        logger.info(f"Task {api.task_id}/{stream.K}: learning from API with {api.num_classes} classes")
        begin_task(state, api.task_id, api.num_classes)
        state.ledgers.append(api.ledger)
        train_task(state, api)
        if artifacts is not None:
            artifacts.save_samples(state, state.task_id)
            artifacts.save_task_checkpoint(state)
            artifacts.write_accuracy(state.accuracy)
            artifacts.write_ledgers(state.ledgers)

    result = RunResult(state.model, state.accuracy, state.ledgers, state.log, state.truncated_tasks)
    if artifacts is not None:
        artifacts.write_json(artifacts.run_dir / "events.json", state.log.events)
        artifacts.write_result(result.summary())
        save_classifier(state.model, artifacts.model_path, {"seed": seed})
    return result
