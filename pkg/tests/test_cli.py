import json
from pathlib import Path

import pytest

from config.settings import settings
from src.cli import (
    CommandError,
    ConfigError,
    TeacherRegistry,
    aggregate_results,
    apply_overrides,
    cmd_report,
    cmd_run,
    cmd_train_apis,
    load_experiment,
    load_run,
)
from src.cli.commands import default_run_name
from src.cli.registry import teacher_seed
from src.main import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR, main

TINY_EXPERIMENT = """
[data]
dataset = "synthetic-4-class-12px"
num_tasks = 2

[apis]
architectures = ["tiny-cnn"]
epochs = 3
batch_size = 32
lr = 0.05

[train]
epochs = 1
steps_per_epoch = 2
batch_size = 8
cl_architecture = "tiny-cnn"
latent_dim = 16
memory_capacity = 40
eval_batch_size = 64

[baselines]
architecture = "tiny-cnn"
epochs = 1
batch_size = 32
lr = 0.05
memory_capacity = 40
replay_batch_size = 8

[run]
seeds = [0, 1]
"""


@pytest.fixture
def experiment_file(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_EXPERIMENT, encoding='utf-8')
    return path


def test_overrides_parse_toml_literals():
    document = apply_overrides({}, [
        "train.lambda_g=0.5",
        "train.ablation.use_replay=false",
        "run.seeds=[3, 4]",
        "data.dataset=svhn",
        'run.name="quoted"',
    ])
    assert document["train"]["lambda_g"] == 0.5
    assert document["train"]["ablation"] == {"use_replay": False}
    assert document["run"] == {"seeds": [3, 4], "name": "quoted"}
    assert document["data"]["dataset"] == "svhn"


@pytest.mark.parametrize("bad", ["train.lambda_g", "lambda_g=1", "train.lambda_g.deeper=1"])
def test_malformed_overrides(bad):
    document = {"train": {"lambda_g": 1.0}}
    with pytest.raises(ConfigError):
        apply_overrides(document, [bad])


def test_load_experiment_with_overrides_and_budget(experiment_file):
    experiment = load_experiment(experiment_file, ["train.lambda_cl=0.25"], budget="12K")
    assert experiment.data.num_tasks == 2
    assert experiment.apis.architecture_for(2) == "tiny-cnn"
    assert experiment.train.lambda_cl == 0.25
    assert experiment.train.budget_per_task == 12_000
    assert experiment.run.seeds == [0, 1]
    assert default_run_name(experiment, "dfcl") == "synthetic-4-class-12px-dfcl-b12000"
    assert default_run_name(experiment, "joint") == "synthetic-4-class-12px-joint"


def test_load_experiment_defaults():
    experiment = load_experiment(None)
    assert experiment.data.dataset == "mnist"
    assert experiment.train.setting == "dfcl"


def test_unreadable_or_invalid_experiments(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[data\nnum_tasks = ", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_experiment(broken)
    with pytest.raises(ConfigError):
        load_experiment(None, ["run.seeds=[1, 1]"])
    with pytest.raises(ConfigError):
        load_experiment(None, ["train.batch_size=1"])


def test_decl_without_fraction_is_a_config_error(experiment_file):
    with pytest.raises(ConfigError):
        cmd_run(experiment_file, "decl")
    assert main(["run", str(experiment_file), "--method", "decl"]) == EXIT_CONFIG_ERROR


def test_main_exit_codes(tmp_path, experiment_file):
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_CONFIG_ERROR
    # no teachers trained yet
    assert main(["run", str(experiment_file), "--method", "dfcl"]) == EXIT_RUNTIME_ERROR


def test_run_without_teachers_fails(experiment_file):
    with pytest.raises(CommandError):
        cmd_run(experiment_file, "models_avg")


def test_teacher_seeds_differ_per_run_seed_and_task():
    seeds = {teacher_seed(s, k) for s in range(3) for k in range(1, 6)}
    assert len(seeds) == 15


def test_train_apis_registers_and_reuses_teachers(experiment_file):
    entries = cmd_train_apis(experiment_file)
    assert sorted(entries) == [0, 1]
    registry = TeacherRegistry(load_experiment(experiment_file))
    assert registry.registry_dir.parent == settings.teachers_dir

    index = json.loads((registry.registry_dir / "index.json").read_text())
    assert set(index["teachers"]) == {"seed_0/task_1", "seed_0/task_2", "seed_1/task_1", "seed_1/task_2"}
    entry = index["teachers"]["seed_1/task_2"]
    assert entry["architecture_id"] == "tiny-cnn"
    assert len(entry["classes"]) == 2
    assert 0.0 <= entry["validation_accuracy"] <= 1.0

    mtimes = {k: registry.checkpoint_path(0, k).stat().st_mtime_ns for k in (1, 2)}
    cmd_train_apis(experiment_file)
    assert {k: registry.checkpoint_path(0, k).stat().st_mtime_ns for k in (1, 2)} == mtimes


def test_teacher_registry_depends_on_teacher_settings_only(experiment_file):
    base = TeacherRegistry(load_experiment(experiment_file))
    same = TeacherRegistry(load_experiment(experiment_file, ["train.lambda_g=0.1", "apis.isolate=true"]))
    other = TeacherRegistry(load_experiment(experiment_file, ["apis.epochs=4"]))
    assert base.registry_dir == same.registry_dir
    assert base.registry_dir != other.registry_dir


def test_run_and_report_end_to_end(experiment_file, tmp_path):
    cmd_train_apis(experiment_file)

    dfcl_root = cmd_run(experiment_file, "dfcl", budget="1K", name="tiny-dfcl")
    run = load_run(dfcl_root)
    assert [r["seed"] for r in run["results"]] == [0, 1]
    assert run["aggregate"] == {
        **aggregate_results(run["results"]),
        "name": "tiny-dfcl",
        "budget_per_task": 1000,
        "lambda_g": 1.0,
        "lambda_cl": 1.0,
    }
    result = run["results"][0]
    assert result["method"] == "dfcl"
    assert len(result["teacher_validation_accuracy"]) == 2
    assert result["ledger"]["training_queries"] == sum(result["queries_per_task"])
    assert (dfcl_root / "seed_0" / "model.pt").exists()
    assert (dfcl_root / "experiment.json").exists()
    assert "Task 2 done" in (dfcl_root / "seed_1" / "run.log").read_text()

    sequential_root = cmd_run(experiment_file, "sequential")
    assert sequential_root.name == "synthetic-4-class-12px-sequential"
    joint_root = cmd_run(experiment_file, "joint")
    assert load_run(joint_root)["aggregate"]["bwt_mean"] is None

    out_dir = cmd_report([dfcl_root, sequential_root, joint_root], tmp_path / "report", cka=(dfcl_root, joint_root))
    rows = (out_dir / "comparison.csv").read_text().splitlines()
    assert len(rows) == 4
    assert "N/A" in (out_dir / "comparison.txt").read_text()
    assert (out_dir / "heatmap_tiny-dfcl.png").exists()
    assert not (out_dir / "heatmap_synthetic-4-class-12px-joint.png").exists()
    assert (out_dir / "cka.png").exists()
    assert len((out_dir / "cka.csv").read_text().splitlines()) == 4


def test_budget_curve_needs_two_budgets(experiment_file, tmp_path):
    cmd_train_apis(experiment_file)
    small = cmd_run(experiment_file, "dfcl", budget="300", overrides=["run.seeds=[0]"])
    large = cmd_run(experiment_file, "dfcl", budget="600", overrides=["run.seeds=[0]"])
    out_dir = cmd_report([small, large], tmp_path / "report")
    lines = (out_dir / "budget_curve.csv").read_text().splitlines()
    assert lines[0] == "method,budget_per_task,acc_mean,acc_std"
    assert [line.split(",")[1] for line in lines[1:]] == ["300", "600"]
    assert (out_dir / "budget_curve.png").exists()


def test_report_refuses_mixed_datasets(experiment_file, tmp_path):
    first = cmd_run(experiment_file, "sequential", overrides=["run.seeds=[0]"])
    second = cmd_run(
        experiment_file,
        "sequential",
        overrides=["run.seeds=[0]", 'data.dataset="synthetic-6-class-12px"', "data.num_tasks=3"],
    )
    with pytest.raises(CommandError):
        cmd_report([first, second], tmp_path / "report")
    with pytest.raises(CommandError):
        cmd_report([tmp_path / "not-a-run"])


def test_main_runs_a_baseline(experiment_file):
    assert main(["run", str(experiment_file), "--method", "sequential", "--set", "run.seeds=[0]", "--name", "cli"]) == EXIT_OK
    assert (settings.runs_dir / "cli" / "aggregate.json").exists()


@pytest.mark.parametrize("name", ["mnist.toml", "desk-check.toml"])
def test_shipped_experiment_files_validate(name):
    experiment = load_experiment(Path(__file__).resolve().parents[1] / "experiments" / name)
    assert experiment.train.setting == "dfcl"
    assert experiment.train.batch_size % 2 == 0
