"""train-apis and run: teacher preparation and multi-seed method execution."""

import json
from contextlib import ExitStack
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from config.settings import settings
from src.baselines import evaluate_models_avg, run_classic_cl, run_ex_model, run_joint, run_sequential
from src.blackbox import BlackBoxApi, QueryApi, RemoteBlackBoxApi, export_ledgers
from src.cli.experiment import ConfigError, ExperimentConfig, load_experiment
from src.cli.registry import TeacherRegistry
from src.nets import load_classifier, save_classifier
from src.trainer import RunArtifacts, TrainConfig, run_stream
from src.utils.logger import attach_run_log, detach_run_log, setup_logger


logger = setup_logger(__name__)

API_METHODS = ("dfcl", "decl")
METHODS = ("dfcl", "decl", "joint", "sequential", "classic", "models_avg", "ex_model")
AGGREGATED_METRICS = ("acc", "bwt", "total_queries")


class CommandError(RuntimeError):
    """A command cannot proceed (missing teachers, incompatible runs, ...)."""


def cmd_train_apis(config_path: Optional[Path], overrides: Sequence[str] = ()) -> Dict[int, List[Dict[str, Any]]]:
    """Train (or reuse) one teacher per task and seed; returns the registry entries per seed."""
    experiment = load_experiment(config_path, overrides)
    registry = TeacherRegistry(experiment)
    entries = {}
    for seed in experiment.run.seeds:
        entries[seed] = registry.ensure_teachers(seed)
        accuracies = [round(e["validation_accuracy"], 4) for e in entries[seed]]
        logger.info(f"Seed {seed}: {len(entries[seed])} teachers ready, validation accuracies {accuracies}")
    logger.info(f"Teacher registry: {registry.registry_dir}")
    return entries


def _teacher_entries(registry: TeacherRegistry, seed: int) -> List[Dict[str, Any]]:
    entries = registry.entries(seed)
    missing = [k for k, entry in enumerate(entries, start=1) if entry is None]
    if missing:
        raise CommandError(
            f"No trained teachers for tasks {missing} (seed {seed}) in {registry.registry_dir}; "
            f"run `train-apis` with the same config first"
        )
    return entries


def _open_apis(stack: ExitStack, experiment: ExperimentConfig, entries: List[Dict[str, Any]]) -> List[QueryApi]:
    apis = []
    for entry in entries:
        path, task_id = Path(entry["path"]), entry["task_id"]
        if experiment.apis.isolate:
            api = stack.enter_context(RemoteBlackBoxApi(path, task_id))
        else:
            api = BlackBoxApi.from_checkpoint(path, task_id)
        api.validation_accuracy = entry["validation_accuracy"]
        apis.append(api)
    return apis


def method_train_config(experiment: ExperimentConfig, method: str) -> TrainConfig:
    """The experiment's [train] section with the setting implied by the method."""
    setting = "decl" if method == "decl" else "dfcl"
    try:
        return TrainConfig.model_validate({**experiment.train.model_dump(), "setting": setting})
    except ValidationError as e:
        raise ConfigError(f"Invalid [train] section for method {method}:\n{e}") from e


def run_method(
    experiment: ExperimentConfig,
    method: str,
    seed: int,
    seed_dir: Path,
    registry: Optional[TeacherRegistry] = None,
    resume: bool = False,
) -> Dict[str, Any]:
    """Execute one (method, seed) run in `seed_dir`; returns the result document."""
    if method not in METHODS:
        raise CommandError(f"Unknown method {method!r} (known: {', '.join(METHODS)})")
    stream = experiment.build_stream(seed)
    artifacts = RunArtifacts(seed_dir)
    document: Dict[str, Any] = {
        "method": method,
        "dataset": experiment.data.dataset,
        "num_tasks": stream.K,
        "seed": seed,
    }

    if method in API_METHODS or method in ("models_avg", "ex_model"):
        registry = registry or TeacherRegistry(experiment)
        entries = _teacher_entries(registry, seed)
        document["teacher_validation_accuracy"] = [e["validation_accuracy"] for e in entries]
        document["teacher_architectures"] = [e["architecture_id"] for e in entries]

    if method in API_METHODS:
        cfg = method_train_config(experiment, method)
        with ExitStack() as stack:
            apis = _open_apis(stack, experiment, entries)
            result = run_stream(stream, apis, cfg, seed, seed_dir, resume=resume)
        summary = result.summary()
        document["ledger"] = export_ledgers(result.ledgers, artifacts.ledger_path)
    elif method == "ex_model":
        cfg = method_train_config(experiment, method)
        teachers = [load_classifier(Path(e["path"])) for e in entries]
        result = run_ex_model(stream, teachers, cfg, seed, seed_dir)
        summary = result.summary()
        document["ledger"] = export_ledgers(result.ledgers, artifacts.ledger_path)
    else:
        if method == "joint":
            result = run_joint(stream, experiment.baselines, seed)
        elif method == "sequential":
            result = run_sequential(stream, experiment.baselines, seed)
        elif method == "classic":
            result = run_classic_cl(stream, experiment.baselines, seed)
        else:
            teachers = [load_classifier(Path(e["path"])) for e in entries]
            result = evaluate_models_avg(stream, teachers, experiment.baselines.eval_batch_size)
        summary = result.summary()
        if result.accuracy is not None:
            artifacts.write_accuracy(result.accuracy)
        save_classifier(result.model, artifacts.model_path, {"seed": seed, "method": method})
        stream.save_manifest(artifacts.manifest_path)

    document.update(summary)
    artifacts.write_result(document)
    return document


def _mean_std(values: List[float]) -> Dict[str, Optional[float]]:
    if not values:
        return {"mean": None, "std": None}
    array = np.asarray(values, dtype=np.float64)
    std = float(array.std(ddof=1)) if len(array) > 1 else 0.0
    return {"mean": float(array.mean()), "std": std}


def aggregate_results(results: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Mean and sample standard deviation over seeds; BWT stays N/A for non-sequential methods."""
    if not results:
        raise CommandError("Nothing to aggregate")
    aggregate: Dict[str, Any] = {
        "method": results[0]["method"],
        "dataset": results[0]["dataset"],
        "seeds": [r["seed"] for r in results],
    }
    for metric in AGGREGATED_METRICS:
        values = [r[metric] for r in results if r.get(metric) is not None]
        stats = _mean_std(values)
        aggregate[f"{metric}_mean"] = stats["mean"]
        aggregate[f"{metric}_std"] = stats["std"]
    aggregate["truncated"] = any(r.get("truncated_tasks") for r in results)
    return aggregate


def default_run_name(experiment: ExperimentConfig, method: str) -> str:
    name = f"{experiment.data.dataset}-{method}"
    if method in API_METHODS and experiment.train.budget_per_task is not None:
        name += f"-b{experiment.train.budget_per_task}"
    return name


def cmd_run(
    config_path: Optional[Path],
    method: str,
    overrides: Sequence[str] = (),
    budget: Optional[str] = None,
    name: Optional[str] = None,
    resume: bool = False,
) -> Path:
    """Run `method` over every configured seed; writes per-seed results and aggregate.json."""
    if method not in METHODS:
        raise CommandError(f"Unknown method {method!r} (known: {', '.join(METHODS)})")
    experiment = load_experiment(config_path, overrides, budget)
    if method in API_METHODS or method == "ex_model":
        method_train_config(experiment, method)

    run_name = name or experiment.run.name or default_run_name(experiment, method)
    run_root = settings.runs_dir / run_name
    run_root.mkdir(parents=True, exist_ok=True)
    with open(run_root / "experiment.json", 'w', encoding='utf-8') as f:
        json.dump({"method": method, "name": run_name, "experiment": experiment.snapshot()}, f, indent=2)

    registry = TeacherRegistry(experiment) if method in API_METHODS + ("models_avg", "ex_model") else None
    results = []
    for seed in experiment.run.seeds:
        seed_dir = run_root / f"seed_{seed}"
        run_log = attach_run_log(seed_dir)
        try:
            logger.info(f"Running {method} on {experiment.data.dataset}, seed {seed}")
            results.append(run_method(experiment, method, seed, seed_dir, registry, resume))
        finally:
            detach_run_log(run_log)

    aggregate = aggregate_results(results)
    aggregate["name"] = run_name
    aggregate["budget_per_task"] = experiment.train.budget_per_task if method in API_METHODS else None
    aggregate["lambda_g"] = experiment.train.lambda_g
    aggregate["lambda_cl"] = experiment.train.lambda_cl
    with open(run_root / "aggregate.json", 'w', encoding='utf-8') as f:
        json.dump(aggregate, f, indent=2)

    bwt = "N/A" if aggregate["bwt_mean"] is None else f"{100 * aggregate['bwt_mean']:.2f} ± {100 * aggregate['bwt_std']:.2f}"
    logger.info(
        f"{run_name}: ACC {100 * aggregate['acc_mean']:.2f} ± {100 * aggregate['acc_std']:.2f}, BWT {bwt} "
        f"over seeds {aggregate['seeds']}"
    )
    return run_root


def load_run(run_root: Path) -> Dict[str, Any]:
    """experiment.json, aggregate.json and every per-seed result of a finished run."""
    run_root = Path(run_root)
    try:
        with open(run_root / "experiment.json", 'r', encoding='utf-8') as f:
            experiment = json.load(f)
        with open(run_root / "aggregate.json", 'r', encoding='utf-8') as f:
            aggregate = json.load(f)
    except FileNotFoundError as e:
        raise CommandError(f"{run_root} is not a finished run directory ({e.filename} missing)") from e
    results = []
    for seed in aggregate["seeds"]:
        with open(run_root / f"seed_{seed}" / "result.json", 'r', encoding='utf-8') as f:
            results.append(json.load(f))
    return {"root": run_root, "experiment": experiment, "aggregate": aggregate, "results": results}
