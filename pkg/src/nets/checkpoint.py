"""Model checkpoints loadable without the training config."""

from pathlib import Path
from typing import Any, Dict, Optional

import torch

from src.nets.classifier import MultiHeadClassifier, build_classifier
from src.nets.generator import ArchitectureError, GeneratorPair
from src.utils.logger import setup_logger


logger = setup_logger(__name__)


def save_classifier(model: MultiHeadClassifier, path: Path, metadata: Optional[Dict[str, Any]] = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "architecture_id": model.architecture_id,
            "image_shape": list(model.image_shape),
            "head_sizes": model.head_sizes,
            "state_dict": model.state_dict(),
            "metadata": metadata or {},
        },
        path,
    )
    logger.debug(f"Saved {model.architecture_id} checkpoint to {path}")


def load_classifier(path: Path, map_location: str = "cpu") -> MultiHeadClassifier:
    try:
        data = torch.load(path, map_location=map_location, weights_only=False)
        model = build_classifier(data["architecture_id"], tuple(data["image_shape"]), data["head_sizes"])
        model.load_state_dict(data["state_dict"])
    except (KeyError, RuntimeError) as e:
        raise ArchitectureError(f"Incompatible classifier checkpoint {path}: {e}") from e
    return model


def save_generators(pair: GeneratorPair, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "latent_dim": pair.latent_dim,
            "image_shape": list(pair.gen_a.image_shape),
            "state_dict": pair.state_dict(),
        },
        path,
    )


def load_generators(path: Path, map_location: str = "cpu") -> GeneratorPair:
    data = torch.load(path, map_location=map_location, weights_only=False)
    pair = GeneratorPair(data["latent_dim"], tuple(data["image_shape"]))
    pair.load_state_dict(data["state_dict"])
    return pair
