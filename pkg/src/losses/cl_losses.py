"""Continual-learner objectives: memory replay, network similarity and the weighted total."""

from collections import defaultdict
from typing import Optional, Sequence

import torch

from src.losses.generator_losses import per_sample_l1
from src.nets import ArchitectureError, MultiHeadClassifier, feature_taps


def memory_replay_loss(model: MultiHeadClassifier, memory_batch: Sequence) -> torch.Tensor:
    """Mean over entries of the L1 gap between stored API logits and the entry's own task head."""
    if len(memory_batch) == 0:
        raise ValueError("Memory replay needs at least one entry")
    device = next(model.parameters()).device

    groups = defaultdict(list)
    for entry in memory_batch:
        groups[entry.task_id].append(entry)

    per_entry = []
    for task_id, entries in sorted(groups.items()):
        head_size = model.head(task_id).out_features
        images = torch.stack([e.image for e in entries]).to(device)
        stored = torch.stack([e.logits for e in entries]).to(device)
        if stored.shape[1] != head_size:
            raise ArchitectureError(f"Stored logits of length {stored.shape[1]} do not fit head {task_id} ({head_size})")
        per_entry.append(per_sample_l1(stored, model(images, task_id)))
    return torch.cat(per_entry).mean()


def pairwise_distances(features: torch.Tensor) -> torch.Tensor:
    """Euclidean distance matrix of flattened per-sample features; zero distances carry zero gradient."""
    flat = features.reshape(features.shape[0], -1)
    gram = flat @ flat.T
    sq_norms = gram.diagonal()
    squared = (sq_norms.unsqueeze(0) + sq_norms.unsqueeze(1) - 2.0 * gram).clamp_min(0.0)
    off_diagonal = ~torch.eye(len(flat), dtype=torch.bool, device=flat.device)
    positive = (squared > 0) & off_diagonal
    safe = torch.where(positive, squared, torch.ones_like(squared))
    return torch.where(positive, safe.sqrt(), torch.zeros_like(squared))


def layer_similarity_term(features: torch.Tensor, snapshot_features: torch.Tensor) -> torch.Tensor:
    """Negated cosine between the two distance matrices, in [-1, 0]; 0 if either matrix is zero."""
    A = pairwise_distances(features).double()
    B = pairwise_distances(snapshot_features).double()
    norm = torch.sqrt((A * A).sum()) * torch.sqrt((B * B).sum())
    if norm.item() == 0.0:
        return torch.zeros((), dtype=features.dtype, device=features.device)
    return (-(A * B).sum() / norm).to(features.dtype)


def network_similarity_loss(
    model: MultiHeadClassifier,
    snapshot: MultiHeadClassifier,
    x_batch: torch.Tensor,
) -> torch.Tensor:
    """Align the pairwise-distance structure of every trunk tap with the frozen snapshot's."""
    if len(x_batch) < 2:
        raise ValueError(f"Network similarity needs at least 2 samples, got {len(x_batch)}")
    if model.tap_points != snapshot.tap_points:
        raise ArchitectureError(f"Tap points differ: {model.tap_points} vs {snapshot.tap_points}")

    # Both sides in the snapshot's mode, so BatchNorm normalizes them with the same statistics.
    was_training = model.training
    model.train(snapshot.training)
    try:
        taps = feature_taps(model, x_batch)
    finally:
        model.train(was_training)
    with torch.no_grad():
        snapshot_taps = feature_taps(snapshot, x_batch)

    total = sum(layer_similarity_term(taps[name], snapshot_taps[name]) for name in taps)
    return total / len(x_batch)


def cl_total_loss(
    L_fcl: torch.Tensor,
    L_M: Optional[torch.Tensor],
    L_S: Optional[torch.Tensor],
    lambda_cl: float = 1.0,
    task_id: int = 1,
) -> torch.Tensor:
    """Task 1 trains on distillation alone; later tasks add the weighted replay and similarity terms."""
    if task_id <= 1:
        return L_fcl
    regularizer = (L_M if L_M is not None else 0.0) + (L_S if L_S is not None else 0.0)
    return L_fcl + lambda_cl * regularizer
