import csv
import math

import numpy as np
import pytest
import torch

from src.losses import (
    LossReport,
    TrainingLog,
    adversarial_generator_loss,
    class_balance_loss,
    cl_total_loss,
    cooperative_diversity_loss,
    distillation_loss,
    generator_total_loss,
    mean_prediction,
    memory_replay_loss,
    network_similarity_loss,
    pairwise_distances,
    per_sample_l1,
)
from src.memory import GENERATED, MemoryEntry
from src.nets import build_classifier, frozen_copy


def test_distillation_and_adversarial_are_exact_negatives():
    a, b = torch.randn(6, 3), torch.randn(6, 3)
    assert torch.equal(adversarial_generator_loss(a, b), -distillation_loss(a, b))
    assert distillation_loss(a, a) == 0


def test_l1_shape_mismatch():
    with pytest.raises(ValueError):
        per_sample_l1(torch.zeros(2, 3), torch.zeros(2, 4))


def test_class_balance_on_uniform_predictions():
    uniform = torch.full((10,), 0.1)
    assert class_balance_loss(uniform, uniform).item() == pytest.approx(-0.46052, abs=1e-5)
    assert class_balance_loss(uniform, uniform).item() == pytest.approx(2 * math.log(0.1) / 10, abs=1e-6)


def test_class_balance_prefers_uniform_and_handles_zeros():
    uniform = torch.full((4,), 0.25)
    peaked = torch.tensor([1.0, 0.0, 0.0, 0.0])
    assert class_balance_loss(peaked, peaked).item() == 0.0
    assert class_balance_loss(uniform, uniform) < class_balance_loss(peaked, uniform)


def test_class_balance_rejects_unnormalized_input():
    with pytest.raises(ValueError):
        class_balance_loss(torch.tensor([0.5, 0.6]), torch.tensor([0.5, 0.5]))


def test_mean_prediction_is_a_distribution():
    probs = mean_prediction(torch.randn(8, 5))
    assert probs.shape == (5,)
    assert probs.sum().item() == pytest.approx(1.0, abs=1e-6)


def test_cooperative_diversity_rewards_distinct_images():
    images = torch.rand(4, 1, 6, 6)
    assert cooperative_diversity_loss(images, images).item() == 0.0
    assert cooperative_diversity_loss(images, -images).item() < 0.0


def test_generator_total_loss_weights_regularizers():
    assert generator_total_loss(1.0, -0.5, -0.25, lambda_g=2.0) == pytest.approx(-0.5)
    ablated = generator_total_loss(torch.tensor(1.0), 0.0, torch.tensor(-0.25), lambda_g=2.0)
    assert torch.is_tensor(ablated) and ablated.item() == pytest.approx(0.5)


def test_pairwise_distances():
    x = torch.tensor([[0.0, 0.0], [3.0, 4.0], [3.0, 4.0]], requires_grad=True)
    D = pairwise_distances(x)
    assert torch.allclose(D, D.T)
    assert torch.equal(D.diagonal(), torch.zeros(3))
    assert D[0, 1].item() == pytest.approx(5.0)
    D.sum().backward()
    assert torch.isfinite(x.grad).all()


def test_network_similarity_against_itself():
    torch.manual_seed(0)
    model = build_classifier("tiny-cnn", (1, 12, 12), [2])
    x = torch.randn(2, 1, 12, 12)
    # three taps, each at perfect alignment (-1), divided by |X| = 2
    assert network_similarity_loss(model, model, x).item() == pytest.approx(-1.5, abs=1e-6)


def test_network_similarity_gradient_reaches_the_trunk():
    torch.manual_seed(0)
    model = build_classifier("tiny-cnn", (1, 12, 12), [2])
    snapshot = build_classifier("tiny-cnn", (1, 12, 12), [2])
    loss = network_similarity_loss(model, snapshot, torch.randn(6, 1, 12, 12))
    assert -3.0 / 6 <= loss.item() <= 0.0
    loss.backward()
    assert next(model.trunk.parameters()).grad is not None
    assert all(p.grad is None for p in snapshot.parameters())


def _naive_similarity(model, snapshot, x):
    n = len(x)
    with torch.no_grad():
        taps, snap_taps = model.forward_taps(x), snapshot.forward_taps(x)
    total = 0.0
    for name in taps:
        f = taps[name].reshape(n, -1).double()
        g = snap_taps[name].reshape(n, -1).double()
        dot = aa = bb = 0.0
        for i in range(n):
            for j in range(n):
                a = math.sqrt(sum(float(v) ** 2 for v in f[i] - f[j]))
                b = math.sqrt(sum(float(v) ** 2 for v in g[i] - g[j]))
                dot, aa, bb = dot + a * b, aa + a * a, bb + b * b
        total += 0.0 if aa == 0 or bb == 0 else -dot / math.sqrt(aa * bb)
    return total / n


def test_network_similarity_matches_a_double_loop():
    torch.manual_seed(1)
    model = build_classifier("tiny-cnn", (1, 12, 12), [2])
    snapshot = build_classifier("tiny-cnn", (1, 12, 12), [2])
    x = torch.randn(4, 1, 12, 12)
    value = network_similarity_loss(model, snapshot, x).item()
    assert -3.0 / 4 < value <= 0.0
    assert value == pytest.approx(_naive_similarity(model, snapshot, x), abs=1e-4)


def test_network_similarity_needs_two_samples():
    model = build_classifier("tiny-cnn", (1, 12, 12), [2])
    with pytest.raises(ValueError):
        network_similarity_loss(model, model, torch.randn(1, 1, 12, 12))


def test_memory_replay_routes_entries_to_their_heads():
    model = build_classifier("tiny-cnn", (1, 12, 12), [2, 3]).eval()
    images = torch.randn(4, 1, 12, 12)
    with torch.no_grad():
        own = [model(images[:2], 1), model(images[2:], 2)]
    entries = [MemoryEntry(images[i], own[0][i], 1, GENERATED) for i in range(2)]
    entries += [MemoryEntry(images[2 + i], own[1][i], 2, GENERATED) for i in range(2)]
    assert memory_replay_loss(model, entries).item() == pytest.approx(0.0, abs=1e-6)

    shifted = [MemoryEntry(e.image, e.logits + 1.0, e.task_id, e.origin) for e in entries]
    assert memory_replay_loss(model, shifted).item() == pytest.approx(1.0, abs=1e-5)


def test_task_one_trains_on_distillation_only():
    L_fcl, L_M, L_S = torch.tensor(0.7), torch.tensor(0.2), torch.tensor(-0.1)
    assert cl_total_loss(L_fcl, L_M, L_S, lambda_cl=1.0, task_id=1) == L_fcl
    assert cl_total_loss(L_fcl, L_M, L_S, lambda_cl=2.0, task_id=2).item() == pytest.approx(0.9)
    assert cl_total_loss(L_fcl, None, L_S, lambda_cl=1.0, task_id=2).item() == pytest.approx(0.6)


def test_loss_reports_reject_non_finite_and_unknown_keys():
    with pytest.raises(ValueError):
        LossReport(1, "cl", 8, {"L_fcl": float("nan")})
    with pytest.raises(ValueError):
        LossReport(1, "cl", 8, {"L_X": 0.1})


def test_training_log_csv(tmp_path):
    log = TrainingLog(tmp_path / "losses.csv")
    log.append(LossReport(1, "generator", 16, {"L_G": -0.3, "total": -0.3}))
    log.append(LossReport(1, "cl", 8, {"L_fcl": 0.3, "total": 0.3}))
    log.record_event(1, "budget_truncation", epoch=1, step=2)
    with open(tmp_path / "losses.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["step"] for r in rows] == ["0", "1"]
    assert rows[0]["L_fcl"] == "" and rows[1]["L_G"] == ""
    assert len(log.for_task(1)) == 2
    assert log.events == [{"task": 1, "event": "budget_truncation", "epoch": 1, "step": 2}]


def test_network_similarity_on_a_batchnorm_trunk_against_its_snapshot():
    torch.manual_seed(0)
    model = build_classifier("resnet-small", (3, 12, 12), [2]).train()
    model(torch.randn(8, 3, 12, 12), 1)  # moves the running statistics away from their init
    snapshot = frozen_copy(model)
    x = torch.randn(6, 3, 12, 12)
    loss = network_similarity_loss(model, snapshot, x)
    assert loss.item() == pytest.approx(-len(model.tap_points) / 6, abs=1e-5)
    assert model.training
    loss.backward()
    assert next(model.trunk.parameters()).grad is not None


def test_class_balance_is_lowest_at_uniform():
    gen = torch.Generator().manual_seed(0)
    uniform = torch.full((10,), 0.1)
    floor = class_balance_loss(uniform, uniform).item()
    for _ in range(1000):
        p = torch.softmax(3 * torch.randn(10, generator=gen), dim=0)
        assert class_balance_loss(p, p).item() >= floor - 1e-6


def _central_difference(loss_fn, param, index, h=1e-6):
    with torch.no_grad():
        original = param[index].item()
        param[index] = original + h
        up = loss_fn().item()
        param[index] = original - h
        down = loss_fn().item()
        param[index] = original
    return (up - down) / (2 * h)


def test_cl_loss_gradients_match_central_differences():
    torch.manual_seed(3)
    model = build_classifier("tiny-cnn", (1, 12, 12), [2, 3]).double().train()
    snapshot = frozen_copy(build_classifier("tiny-cnn", (1, 12, 12), [2, 3])).double()
    x = torch.randn(5, 1, 12, 12, dtype=torch.float64)
    api_logits = torch.randn(5, 3, dtype=torch.float64)
    replay = [MemoryEntry(torch.randn(1, 12, 12, dtype=torch.float64), torch.randn(2, dtype=torch.float64), 1, GENERATED)
              for _ in range(4)]

    def total():
        L_fcl = distillation_loss(api_logits, model(x, 2))
        return cl_total_loss(L_fcl, memory_replay_loss(model, replay), network_similarity_loss(model, snapshot, x),
                             lambda_cl=0.7, task_id=2)

    model.zero_grad()
    total().backward()
    params = dict(model.named_parameters())
    for name in ("trunk.blocks.block1.0.weight", "trunk.blocks.fc.0.weight", "heads.0.weight", "heads.1.bias"):
        param = params[name]
        flat_grad = param.grad.reshape(-1)
        for i in range(0, param.numel(), max(1, param.numel() // 4))[:4]:
            index = tuple(int(v) for v in np.unravel_index(i, tuple(param.shape)))
            numeric = _central_difference(total, param, index)
            assert flat_grad[i].item() == pytest.approx(numeric, rel=1e-2, abs=1e-6), (name, i)
