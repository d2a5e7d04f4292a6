"""Image grids of generated samples for qualitative inspection."""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from src.utils.logger import setup_logger


logger = setup_logger(__name__)

MAX_GRID_DIMENSION = 1600
UPSCALE_BELOW = 64  # tiny images are enlarged so the grid stays readable


def _to_uint8(images: torch.Tensor) -> np.ndarray:
    """N x C x H x W in [-1, 1] -> N x H x W x C uint8."""
    array = ((images.detach().cpu().clamp(-1, 1) + 1.0) * 127.5).round().to(torch.uint8)
    return array.permute(0, 2, 3, 1).numpy()


def save_sample_grid(images_a: torch.Tensor, images_b: torch.Tensor, path: Path) -> Path:
    """Two rows-of-columns grid: G_A samples on top, G_B samples below, paired by latent."""
    try:
        rows = np.concatenate([np.concatenate(list(_to_uint8(batch)), axis=1) for batch in (images_a, images_b)], axis=0)
        if rows.shape[2] == 1:
            img = Image.fromarray(rows[:, :, 0])
        else:
            img = Image.fromarray(rows)

        h = images_a.shape[-2]
        if h < UPSCALE_BELOW:
            scale = UPSCALE_BELOW // h
            img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
        if max(img.size) > MAX_GRID_DIMENSION:
            ratio = MAX_GRID_DIMENSION / max(img.size)
            img = img.resize((int(img.width * ratio), int(img.height * ratio)), Image.LANCZOS)

        path.parent.mkdir(parents=True, exist_ok=True)
        img.save(path)
        logger.debug(f"Saved sample grid {path.name}: {img.width}x{img.height}")
        return path
    except Exception as e:
        logger.warning(f"Failed to save sample grid {path}: {e}")
        return None
