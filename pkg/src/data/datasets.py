"""Dataset registry: torchvision sources, user-supplied image folders, procedural data."""

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Tuple

import torch
from torchvision import datasets, transforms

from config.settings import settings
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

SYNTHETIC_PATTERN = re.compile(r"^synthetic-(\d+)-class(?:-(\d+)px)?$")


class DatasetError(ValueError):
    """Unknown dataset, impossible split or invalid sampling request."""


@dataclass(frozen=True)
class RawDataset:
    """A whole labelled dataset with images already scaled to [-1, 1]."""

    name: str
    train_images: torch.Tensor
    train_labels: torch.Tensor
    test_images: torch.Tensor
    test_labels: torch.Tensor

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.train_images.shape[1:])

    @property
    def classes(self) -> list:
        return sorted(set(self.train_labels.tolist()) | set(self.test_labels.tolist()))

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def to_unit_range(images: torch.Tensor) -> torch.Tensor:
    """Map [0, 1] pixels to [-1, 1], the range of the generator's Tanh output."""
    return images * 2.0 - 1.0


def _stack_torchvision(dataset) -> Tuple[torch.Tensor, torch.Tensor]:
    loader = torch.utils.data.DataLoader(dataset, batch_size=1024, shuffle=False)
    images, labels = [], []
    for x, y in loader:
        images.append(x)
        labels.append(torch.as_tensor(y))
    return to_unit_range(torch.cat(images)), torch.cat(labels).long()


def _load_torchvision(name: str) -> RawDataset:
    root = Path(settings.data_dir)
    to_tensor = transforms.ToTensor()
    if name == "mnist":
        train = datasets.MNIST(root, train=True, download=settings.download, transform=to_tensor)
        test = datasets.MNIST(root, train=False, download=settings.download, transform=to_tensor)
    elif name == "cifar10":
        train = datasets.CIFAR10(root, train=True, download=settings.download, transform=to_tensor)
        test = datasets.CIFAR10(root, train=False, download=settings.download, transform=to_tensor)
    elif name == "cifar100":
        train = datasets.CIFAR100(root, train=True, download=settings.download, transform=to_tensor)
        test = datasets.CIFAR100(root, train=False, download=settings.download, transform=to_tensor)
    elif name == "svhn":
        train = datasets.SVHN(root, split="train", download=settings.download, transform=to_tensor)
        test = datasets.SVHN(root, split="test", download=settings.download, transform=to_tensor)
    else:
        raise DatasetError(f"Unknown dataset: {name}")

    train_images, train_labels = _stack_torchvision(train)
    test_images, test_labels = _stack_torchvision(test)
    return RawDataset(name, train_images, train_labels, test_images, test_labels)


def _load_miniimagenet(name: str) -> RawDataset:
    """MiniImageNet from a user-supplied `train/` + `test/` ImageFolder tree, resized to 84px."""
    root = Path(settings.data_dir) / "miniimagenet"
    if not root.exists():
        raise DatasetError(f"MiniImageNet expected under {root} (train/ and test/ class folders)")
    transform = transforms.Compose([transforms.Resize((84, 84)), transforms.ToTensor()])
    train_images, train_labels = _stack_torchvision(datasets.ImageFolder(root / "train", transform=transform))
    test_images, test_labels = _stack_torchvision(datasets.ImageFolder(root / "test", transform=transform))
    return RawDataset(name, train_images, train_labels, test_images, test_labels)


def make_synthetic(
    num_classes: int,
    image_size: int = 28,
    channels: int = 1,
    train_per_class: int = 120,
    test_per_class: int = 40,
    noise: float = 0.35,
    seed: int = 0,
) -> RawDataset:
    """Procedural dataset: one smooth random prototype per class plus pixel noise."""
    gen = torch.Generator().manual_seed(seed)
    coarse = torch.randn(num_classes, channels, 4, 4, generator=gen)
    prototypes = torch.nn.functional.interpolate(
        coarse, size=(image_size, image_size), mode="bilinear", align_corners=False
    ).tanh()

    def draw(per_class: int) -> Tuple[torch.Tensor, torch.Tensor]:
        labels = torch.arange(num_classes).repeat_interleave(per_class)
        images = prototypes[labels] + noise * torch.randn(len(labels), channels, image_size, image_size, generator=gen)
        return images.clamp(-1.0, 1.0), labels

    train_images, train_labels = draw(train_per_class)
    test_images, test_labels = draw(test_per_class)
    name = f"synthetic-{num_classes}-class-{image_size}px"
    return RawDataset(name, train_images, train_labels, test_images, test_labels)


_LOADERS: Dict[str, Callable[[str], RawDataset]] = {
    "mnist": _load_torchvision,
    "svhn": _load_torchvision,
    "cifar10": _load_torchvision,
    "cifar100": _load_torchvision,
    "miniimagenet": _load_miniimagenet,
}

# Generator latent size per dataset; every other dataset uses 256.
LATENT_DIMS = {"mnist": 100}


def default_latent_dim(dataset_name: str) -> int:
    if dataset_name.lower().startswith("synthetic"):
        return 32
    return LATENT_DIMS.get(dataset_name.lower(), 256)


@lru_cache(maxsize=4)
def load_dataset(name: str) -> RawDataset:
    """Load a dataset by registry name; cached, read-only after construction."""
    key = name.lower()
    match = SYNTHETIC_PATTERN.match(key)
    if match:
        size = int(match.group(2)) if match.group(2) else 28
        return make_synthetic(int(match.group(1)), image_size=size)
    if key not in _LOADERS:
        raise DatasetError(f"Unknown dataset: {name}")
    logger.info(f"Loading dataset {key} from {settings.data_dir}")
    try:
        return _LOADERS[key](key)
    except RuntimeError as e:
        # torchvision raises RuntimeError when files are missing and download is off
        raise DatasetError(f"Dataset {key} not found under {settings.data_dir}: {e}") from e
