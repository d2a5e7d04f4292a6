"""Generator-side objectives: adversarial gap, cooperative diversity, class balance."""

from typing import Union

import torch


def per_sample_l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference per sample (leading dimension)."""
    if a.shape != b.shape:
        raise ValueError(f"Shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().reshape(a.shape[0], -1).mean(dim=1)


def distillation_loss(api_logits: torch.Tensor, cl_logits: torch.Tensor) -> torch.Tensor:
    """L1 imitation loss of the CL model against the API; zero iff outputs are equal."""
    return per_sample_l1(api_logits, cl_logits).mean()


def adversarial_generator_loss(api_logits: torch.Tensor, cl_logits: torch.Tensor) -> torch.Tensor:
    """Negated output gap; minimizing it drives the generators towards hard samples."""
    return -distillation_loss(api_logits, cl_logits)


def cooperative_diversity_loss(imgs_a: torch.Tensor, imgs_b: torch.Tensor) -> torch.Tensor:
    """Negated L1 distance between images generated by G_A and G_B from one latent batch."""
    return -per_sample_l1(imgs_a, imgs_b).mean()


def class_balance_loss(probs_a: torch.Tensor, probs_b: torch.Tensor) -> torch.Tensor:
    """Mean p log p of both batch-averaged predicted distributions; lowest when both are uniform."""
    for name, probs in (("probs_a", probs_a), ("probs_b", probs_b)):
        total = float(probs.detach().sum())
        if abs(total - 1.0) > 1e-5:
            raise ValueError(f"{name} must sum to 1 (got {total:.7f})")
    num_classes = probs_a.shape[-1]
    neg_entropy_a = torch.special.xlogy(probs_a, probs_a).sum() / num_classes
    neg_entropy_b = torch.special.xlogy(probs_b, probs_b).sum() / num_classes
    return neg_entropy_a + neg_entropy_b


def mean_prediction(cl_logits: torch.Tensor) -> torch.Tensor:
    """Batch mean of the softmaxed task-head outputs."""
    return torch.softmax(cl_logits, dim=1).mean(dim=0)


def generator_total_loss(
    L_G: torch.Tensor,
    L_C: Union[torch.Tensor, float],
    L_B: Union[torch.Tensor, float],
    lambda_g: float = 1.0,
) -> torch.Tensor:
    """Adversarial gap plus the weighted diversity and balance regularizers (0.0 for an ablated term)."""
    return L_G + lambda_g * (L_C + L_B)
