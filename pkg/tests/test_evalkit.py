import numpy as np
import pytest
import torch

from src.evalkit import (
    AccuracyMatrix,
    acc_metric,
    bwt_metric,
    evaluate_row,
    layer_similarity_map,
    linear_cka,
    metrics_summary,
)
from src.nets import ArchitectureError, build_classifier


def _naive_acc_bwt(dense):
    K = dense.shape[0]
    acc = np.mean(dense[K - 1, :K])
    bwt = None if K == 1 else np.mean([dense[K - 1, i] - dense[i, i] for i in range(K - 1)])
    return acc, bwt


def test_metrics_match_a_naive_implementation():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        K = int(rng.integers(1, 11))
        dense = np.tril(rng.random((K, K)))
        m = AccuracyMatrix([list(dense[k, :k + 1]) for k in range(K)])
        acc, bwt = _naive_acc_bwt(dense)
        assert abs(acc_metric(m) - acc) <= 1e-12
        if bwt is None:
            assert bwt_metric(m) is None
        else:
            assert abs(bwt_metric(m) - bwt) <= 1e-12


def test_single_task_and_perfect_retention():
    assert bwt_metric(AccuracyMatrix([[0.9]])) is None
    m = AccuracyMatrix([[0.9], [0.9, 0.8], [0.9, 0.8, 0.7]])
    assert bwt_metric(m) == pytest.approx(0.0)
    assert acc_metric(m) == pytest.approx(0.8)


def test_forgetting_gives_negative_bwt():
    m = AccuracyMatrix([[1.0], [0.4, 1.0]])
    summary = metrics_summary(m)
    assert summary["bwt"] == pytest.approx(-0.6)
    assert summary["bwt_pct"] == pytest.approx(-60.0)
    assert summary["acc_pct"] == pytest.approx(70.0)


def test_matrix_validation_and_indexing(tmp_path):
    m = AccuracyMatrix()
    with pytest.raises(ValueError):
        m.append_row([0.5, 0.5])
    with pytest.raises(ValueError):
        m.append_row([1.5])
    m.append_row([0.5])
    m.append_row([0.25, 0.75])
    assert m[2, 1] == 0.25
    with pytest.raises(IndexError):
        m[1, 2]
    m.save(tmp_path / "accuracy.json")
    assert AccuracyMatrix.load(tmp_path / "accuracy.json").rows == m.rows
    m.to_csv(tmp_path / "accuracy.csv")
    lines = (tmp_path / "accuracy.csv").read_text().splitlines()
    assert lines[0] == "after_task,task_1,task_2"
    assert lines[1].endswith(",")


def test_acc_needs_a_row():
    with pytest.raises(ValueError):
        acc_metric(AccuracyMatrix())


def test_evaluation_uses_each_task_head(stream, teachers):
    model = build_classifier("tiny-cnn", stream.image_shape, [2, 2])
    model.trunk.load_state_dict(teachers[0].trunk.state_dict())
    model.heads[0].load_state_dict(teachers[0].heads[0].state_dict())
    row = evaluate_row(model, stream.tasks[:1])
    assert len(row) == 1 and row[0] >= 0.75
    with pytest.raises(ArchitectureError):
        evaluate_row(build_classifier("tiny-cnn", stream.image_shape, [2]), list(stream))


def test_cka_properties():
    gen = torch.Generator().manual_seed(0)
    X = torch.randn(50, 10, generator=gen)
    assert linear_cka(X, X) == pytest.approx(1.0, abs=1e-9)

    Q, _ = torch.linalg.qr(torch.randn(10, 10, generator=gen))
    assert linear_cka(X, 3.0 * X @ Q) == pytest.approx(1.0, abs=1e-6)

    Y = torch.randn(50, 7, generator=gen)
    value = linear_cka(X, Y)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(linear_cka(Y, X), abs=1e-12)


def test_cka_of_constant_activations_is_zero():
    assert linear_cka(torch.ones(20, 4), torch.randn(20, 4)) == 0.0


def test_layer_similarity_map_of_a_model_with_itself():
    torch.manual_seed(0)
    model = build_classifier("tiny-cnn", (1, 12, 12), [2])
    matrix, names_a, names_b = layer_similarity_map(model, model, torch.randn(40, 1, 12, 12))
    assert matrix.shape == (3, 3)
    assert names_a == names_b == model.tap_points
    assert torch.allclose(matrix.diagonal(), torch.ones(3, dtype=matrix.dtype), atol=1e-6)
    assert model.training
