"""Image generator used for data-free query synthesis."""

import math
from typing import Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F


class ArchitectureError(ValueError):
    """Unknown architecture, shape mismatch, missing head or incompatible checkpoint."""


class GeneratorNet(nn.Module):
    """Latent vector -> image in [-1, 1].

    FC to a 128-channel map at a quarter of the target resolution, two
    upsample + conv stages, a final conv and Tanh.
    """

    def __init__(self, latent_dim: int, image_shape: Tuple[int, int, int]):
        super().__init__()
        self.latent_dim = latent_dim
        self.image_shape = tuple(image_shape)
        channels, height, width = self.image_shape
        self.init_size = (math.ceil(height / 4), math.ceil(width / 4))

        self.fc = nn.Linear(latent_dim, 128 * self.init_size[0] * self.init_size[1])
        self.block1 = nn.BatchNorm2d(128)
        self.block2 = nn.Sequential(
            nn.Conv2d(128, 128, 3, stride=1, padding=1),
            nn.BatchNorm2d(128, 0.8),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.block3 = nn.Sequential(
            nn.Conv2d(128, 64, 3, stride=1, padding=1),
            nn.BatchNorm2d(64, 0.8),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.to_image = nn.Sequential(
            nn.Conv2d(64, channels, 3, stride=1, padding=1),
            nn.Tanh(),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() != 2 or z.shape[1] != self.latent_dim:
            raise ArchitectureError(f"Expected latent batch N x {self.latent_dim}, got {tuple(z.shape)}")
        out = self.fc(z).view(z.shape[0], 128, *self.init_size)
        out = self.block1(out)
        out = F.interpolate(out, scale_factor=2)
        out = self.block2(out)
        out = F.interpolate(out, scale_factor=2)
        out = self.block3(out)
        if tuple(out.shape[-2:]) != self.image_shape[1:]:
            out = F.interpolate(out, size=self.image_shape[1:])
        return self.to_image(out)

    def sample_latent(self, n: int, generator: torch.Generator = None, device=None) -> torch.Tensor:
        return torch.randn(n, self.latent_dim, generator=generator).to(device or "cpu")


def generator_forward(gen: GeneratorNet, z_batch: torch.Tensor) -> torch.Tensor:
    """Map a latent batch to images; differentiable with respect to the generator parameters."""
    return gen(z_batch)


class GeneratorPair(nn.Module):
    """Two cooperative generators fed the same latent batch."""

    def __init__(self, latent_dim: int, image_shape: Tuple[int, int, int]):
        super().__init__()
        self.latent_dim = latent_dim
        self.gen_a = GeneratorNet(latent_dim, image_shape)
        self.gen_b = GeneratorNet(latent_dim, image_shape)

    def forward(self, z: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return generator_forward(self.gen_a, z), generator_forward(self.gen_b, z)
