"""Zeroth-order estimation of a loss gradient at the generator's output images.

The black-box API admits no backpropagation, so the gradient of the
adversarial loss with respect to each generated image is estimated with
forward differences along random unit-sphere directions:

    g(x) = 1/m * sum_i  d * (L(x + eps * u_i) - L(x)) / eps * u_i

and then injected as the upstream gradient at the image, from where ordinary
reverse-mode differentiation carries it into the generator parameters.
"""

import math
from typing import Callable, Optional, Tuple

import torch
from pydantic import BaseModel, Field, field_validator


LossFn = Callable[[torch.Tensor], torch.Tensor]


class ZerothOrderError(FloatingPointError):
    """The loss returned non-finite values at the evaluation points."""


class ZoConfig(BaseModel):
    epsilon: float = Field(1e-3, gt=0)
    num_directions: int = Field(1, ge=1)

    @field_validator("epsilon")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("epsilon must be finite")
        return value

    def queries_per_sample(self) -> int:
        return self.num_directions + 1


def sample_unit_sphere(
    n: int,
    m: int,
    d: int,
    generator: Optional[torch.Generator] = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """n x m directions drawn uniformly from the unit sphere in R^d (normalized Gaussians)."""
    u = torch.randn(n, m, d, generator=generator, dtype=dtype)
    return u / u.norm(dim=2, keepdim=True)


def estimate_input_gradient(
    loss_at: LossFn,
    x_hat: torch.Tensor,
    cfg: ZoConfig,
    generator: Optional[torch.Generator] = None,
    directions: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Forward-difference gradient estimate of a per-sample loss at `x_hat`.

    `loss_at` maps an image batch to one loss value per image. It is called
    exactly once, on the N unperturbed images followed by the N*m perturbed
    ones, so an API behind it sees (m + 1) queries per sample.

    Returns the estimate (same shape as `x_hat`) and the unperturbed
    per-sample losses.
    """
    x = x_hat.detach()
    n = x.shape[0]
    flat = x.reshape(n, -1)
    d = flat.shape[1]
    m = cfg.num_directions

    if directions is None:
        directions = sample_unit_sphere(n, m, d, generator, flat.dtype)
    u = directions.to(device=flat.device, dtype=flat.dtype).reshape(n, m, d)

    perturbed = (flat.unsqueeze(1) + cfg.epsilon * u).reshape(n * m, *x.shape[1:])
    with torch.no_grad():
        losses = loss_at(torch.cat([x, perturbed], dim=0))
    if not torch.isfinite(losses).all():
        raise ZerothOrderError(f"Non-finite loss values during gradient estimation: {losses[~torch.isfinite(losses)][:5].tolist()}")

    baseline = losses[:n]
    differences = losses[n:].reshape(n, m) - baseline.unsqueeze(1)
    estimate = (d * differences.unsqueeze(2) * u / cfg.epsilon).mean(dim=1)
    return estimate.reshape_as(x), baseline


def exact_input_gradient(loss_at: LossFn, x_hat: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """White-box counterpart: the true per-sample gradient by backpropagation."""
    x = x_hat.detach().requires_grad_(True)
    losses = loss_at(x)
    (gradient,) = torch.autograd.grad(losses.sum(), x)
    return gradient, losses.detach()
