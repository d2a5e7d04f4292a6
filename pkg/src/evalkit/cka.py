"""Layer-wise linear CKA between two models' trunk activations."""

from typing import List, Tuple

import torch

from src.nets import MultiHeadClassifier, feature_taps
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

MAX_PROBE_SAMPLES = 512


def centering(K: torch.Tensor) -> torch.Tensor:
    n = K.shape[0]
    H = torch.eye(n, dtype=K.dtype, device=K.device) - torch.full((n, n), 1.0 / n, dtype=K.dtype, device=K.device)
    return H @ K @ H


def linear_hsic(X: torch.Tensor, Y: torch.Tensor) -> torch.Tensor:
    n = len(X)
    return torch.sum(centering(X @ X.T) * centering(Y @ Y.T)) / (n - 1) ** 2


def linear_cka(X: torch.Tensor, Y: torch.Tensor) -> float:
    """Linear CKA of two activation sets (samples x features); 0 for constant activations."""
    X = X.reshape(len(X), -1).double()
    Y = Y.reshape(len(Y), -1).double()
    denom = torch.sqrt(linear_hsic(X, X)) * torch.sqrt(linear_hsic(Y, Y))
    if not torch.isfinite(denom) or denom <= 1e-12:
        logger.warning("Degenerate (constant) activations in CKA; similarity set to 0")
        return 0.0
    return float((linear_hsic(X, Y) / denom).clamp(0.0, 1.0))


@torch.no_grad()
def layer_similarity_map(
    model_a: MultiHeadClassifier,
    model_b: MultiHeadClassifier,
    probe_batch: torch.Tensor,
) -> Tuple[torch.Tensor, List[str], List[str]]:
    """CKA for every (layer of a, layer of b) pair.

    Returns the similarity matrix (rows: layers of a, columns: layers of b)
    together with both layer-name lists.
    """
    if len(probe_batch) < 2:
        raise ValueError("CKA needs at least 2 probe samples")
    probe = probe_batch[:MAX_PROBE_SAMPLES]

    states = (model_a.training, model_b.training)
    model_a.eval()
    model_b.eval()
    taps_a = feature_taps(model_a, probe.to(next(model_a.parameters()).device))
    taps_b = feature_taps(model_b, probe.to(next(model_b.parameters()).device))
    model_a.train(states[0])
    model_b.train(states[1])

    names_a, names_b = list(taps_a), list(taps_b)
    similarity = torch.zeros(len(names_a), len(names_b), dtype=torch.float64)
    for i, name_a in enumerate(names_a):
        for j, name_b in enumerate(names_b):
            similarity[i, j] = linear_cka(taps_a[name_a].cpu(), taps_b[name_b].cpu())
    return similarity, names_a, names_b
