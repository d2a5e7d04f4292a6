import pytest
import torch

from src.baselines import (
    SupervisedConfig,
    evaluate_models_avg,
    run_classic_cl,
    run_ex_model,
    run_joint,
    run_models_avg,
    run_sequential,
)
from src.memory import MemoryBufferError
from src.nets import ArchitectureError, build_classifier


@pytest.fixture
def sup_cfg():
    return SupervisedConfig(architecture="tiny-cnn", epochs=4, batch_size=32, lr=0.05, memory_capacity=40, replay_batch_size=16)


def test_joint_reports_no_bwt(stream, sup_cfg):
    result = run_joint(stream, sup_cfg, seed=0)
    summary = result.summary()
    assert summary["bwt"] is None and summary["matrix"] is None
    assert len(summary["final_accuracies"]) == stream.K
    assert summary["acc"] >= 0.75


def test_sequential_fills_the_matrix(stream, sup_cfg):
    result = run_sequential(stream, sup_cfg, seed=0)
    assert result.accuracy.K == 2
    assert result.final_accuracies == result.accuracy.rows[-1]
    assert result.summary()["bwt"] is not None


def test_classic_without_replay_batch_is_sequential(stream, sup_cfg):
    no_replay = sup_cfg.model_copy(update={"replay_batch_size": 0})
    assert run_classic_cl(stream, no_replay, seed=1).accuracy.rows == run_sequential(stream, sup_cfg, seed=1).accuracy.rows


def test_classic_replay_needs_a_slot_per_task(stream, sup_cfg):
    with pytest.raises(MemoryBufferError):
        run_classic_cl(stream, sup_cfg.model_copy(update={"memory_capacity": 1}), seed=0)


def test_classic_replay_with_a_raw_fraction(stream, sup_cfg):
    result = run_classic_cl(stream, sup_cfg, seed=0, raw_fraction=0.1)
    assert result.accuracy.K == 2
    with pytest.raises(ValueError):
        run_classic_cl(stream, sup_cfg, seed=0, raw_fraction=1.5)


def test_averaging_identical_teachers_is_the_teacher(teachers):
    teacher = teachers[0]
    averaged = run_models_avg([teacher, teacher])
    x = torch.rand(5, 1, 12, 12) * 2 - 1
    with torch.no_grad():
        expected = teacher(x, 1)
        assert torch.allclose(averaged(x, 1), expected, atol=1e-6)
        assert torch.allclose(averaged(x, 2), expected, atol=1e-6)
        assert torch.allclose(run_models_avg([teacher])(x, 1), expected, atol=1e-6)


def test_models_avg_needs_one_architecture(teachers):
    other = build_classifier("lenet", (1, 12, 12), [2])
    with pytest.raises(ArchitectureError):
        run_models_avg([teachers[0], other])
    with pytest.raises(ArchitectureError):
        run_models_avg([build_classifier("tiny-cnn", (1, 12, 12), [2, 2])])


def test_models_avg_evaluation(stream, teachers):
    result = evaluate_models_avg(stream, teachers)
    assert len(result.final_accuracies) == stream.K
    assert result.summary()["bwt"] is None


def test_ex_model_makes_no_metered_queries(stream, teachers, tiny_cfg):
    result = run_ex_model(stream, teachers, tiny_cfg, seed=0)
    assert result.accuracy.K == 2
    assert all(ledger.total_queries == 0 for ledger in result.ledgers)
    assert result.summary()["total_queries"] == 0
