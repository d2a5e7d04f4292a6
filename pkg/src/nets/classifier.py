"""Classifier trunks, the multi-head continual model and the architecture registry."""

from collections import OrderedDict
from typing import Callable, Dict, List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.nets.generator import ArchitectureError


class Trunk(nn.Module):
    """Feature extractor made of named blocks; every block output is a tap point."""

    feature_dim: int

    def __init__(self):
        super().__init__()
        self.blocks = nn.ModuleDict()

    @property
    def tap_points(self) -> List[str]:
        return list(self.blocks.keys())

    def forward_taps(self, x: torch.Tensor) -> "OrderedDict[str, torch.Tensor]":
        taps = OrderedDict()
        out = x
        for name, block in self.blocks.items():
            out = block(out)
            taps[name] = out
        return taps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks.values():
            x = block(x)
        return x


class LeNetTrunk(Trunk):
    """LeNet-5: three conv blocks and the 84-unit FC layer."""

    def __init__(self, image_shape: Tuple[int, int, int]):
        super().__init__()
        channels = image_shape[0]
        self.blocks["block1"] = nn.Sequential(
            nn.Conv2d(channels, 6, kernel_size=5, padding=2), nn.ReLU(), nn.MaxPool2d(2, stride=2)
        )
        self.blocks["block2"] = nn.Sequential(
            nn.Conv2d(6, 16, kernel_size=5), nn.ReLU(), nn.MaxPool2d(2, stride=2)
        )
        self.blocks["block3"] = nn.Sequential(
            nn.Conv2d(16, 120, kernel_size=5), nn.ReLU(), nn.AdaptiveAvgPool2d(1), nn.Flatten()
        )
        self.blocks["fc"] = nn.Sequential(nn.Linear(120, 84), nn.ReLU())
        self.feature_dim = 84


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, in_planes: int, planes: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, kernel_size=3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, kernel_size=3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_planes, planes, kernel_size=1, stride=stride, bias=False),
                nn.BatchNorm2d(planes),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class ResNetTrunk(Trunk):
    """ResNet topology: stem, four stages of BasicBlocks, global average pooling."""

    def __init__(self, image_shape: Tuple[int, int, int], widths=(64, 128, 256, 512), blocks_per_stage=2):
        super().__init__()
        in_planes = widths[0]
        self.blocks["stem"] = nn.Sequential(
            nn.Conv2d(image_shape[0], in_planes, kernel_size=3, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(in_planes),
            nn.ReLU(),
        )
        for i, planes in enumerate(widths):
            layers = []
            for j in range(blocks_per_stage):
                stride = 2 if (i > 0 and j == 0) else 1
                layers.append(BasicBlock(in_planes, planes, stride))
                in_planes = planes
            self.blocks[f"layer{i + 1}"] = nn.Sequential(*layers)
        self.blocks["pool"] = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten())
        self.feature_dim = in_planes

    @property
    def tap_points(self) -> List[str]:
        # The stem is an input adapter, not a major block.
        return [name for name in self.blocks.keys() if name != "stem"]

    def forward_taps(self, x: torch.Tensor) -> "OrderedDict[str, torch.Tensor]":
        taps = super().forward_taps(x)
        taps.pop("stem")
        return taps


class TinyCnnTrunk(Trunk):
    """Two conv blocks and a small FC layer; for fast desk checks."""

    def __init__(self, image_shape: Tuple[int, int, int]):
        super().__init__()
        self.blocks["block1"] = nn.Sequential(
            nn.Conv2d(image_shape[0], 8, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool2d(2)
        )
        self.blocks["block2"] = nn.Sequential(
            nn.Conv2d(8, 16, kernel_size=3, padding=1), nn.ReLU(), nn.AdaptiveAvgPool2d(2), nn.Flatten()
        )
        self.blocks["fc"] = nn.Sequential(nn.Linear(64, 32), nn.ReLU())
        self.feature_dim = 32


TRUNKS: Dict[str, Callable[[Tuple[int, int, int]], Trunk]] = {
    "lenet": LeNetTrunk,
    "resnet18": ResNetTrunk,
    "resnet-small": lambda shape: ResNetTrunk(shape, widths=(16, 32, 64, 128), blocks_per_stage=1),
    "tiny-cnn": TinyCnnTrunk,
}


class MultiHeadClassifier(nn.Module):
    """Shared trunk with one linear head per task; task ids start at 1."""

    def __init__(self, architecture_id: str, image_shape: Tuple[int, int, int]):
        super().__init__()
        if architecture_id not in TRUNKS:
            raise ArchitectureError(f"Unknown architecture: {architecture_id} (known: {sorted(TRUNKS)})")
        self.architecture_id = architecture_id
        self.image_shape = tuple(image_shape)
        self.trunk = TRUNKS[architecture_id](self.image_shape)
        self.heads = nn.ModuleList()

    @property
    def tap_points(self) -> List[str]:
        return self.trunk.tap_points

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    @property
    def head_sizes(self) -> List[int]:
        return [head.out_features for head in self.heads]

    def add_head(self, num_classes: int) -> int:
        """Append a head for the next task; returns its task id."""
        device = next(self.trunk.parameters()).device
        self.heads.append(nn.Linear(self.trunk.feature_dim, num_classes).to(device))
        return len(self.heads)

    def head(self, task_id: int) -> nn.Linear:
        if not 1 <= task_id <= len(self.heads):
            raise ArchitectureError(f"No head for task {task_id} (model has {len(self.heads)} heads)")
        return self.heads[task_id - 1]

    def forward(self, x: torch.Tensor, task_id: int = 1) -> torch.Tensor:
        head = self.head(task_id)
        return head(self.trunk(x))

    def forward_taps(self, x: torch.Tensor) -> "OrderedDict[str, torch.Tensor]":
        if tuple(x.shape[1:]) != self.image_shape:
            raise ArchitectureError(f"Expected inputs of shape {self.image_shape}, got {tuple(x.shape[1:])}")
        return self.trunk.forward_taps(x)


def build_classifier(architecture_id: str, image_shape: Tuple[int, int, int], head_sizes: List[int] = ()) -> MultiHeadClassifier:
    model = MultiHeadClassifier(architecture_id, image_shape)
    for size in head_sizes:
        model.add_head(size)
    return model


def feature_taps(model: MultiHeadClassifier, x_batch: torch.Tensor) -> "OrderedDict[str, torch.Tensor]":
    """Trunk activations per tap point, in trunk order; heads excluded."""
    return model.forward_taps(x_batch)


def frozen_copy(model: MultiHeadClassifier) -> MultiHeadClassifier:
    """Parameter-frozen snapshot in eval mode (f_pre)."""
    snapshot = build_classifier(model.architecture_id, model.image_shape, model.head_sizes)
    snapshot.load_state_dict(model.state_dict())
    snapshot.to(next(model.parameters()).device)
    snapshot.eval()
    for p in snapshot.parameters():
        p.requires_grad_(False)
    return snapshot
