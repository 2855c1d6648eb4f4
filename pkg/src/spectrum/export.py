"""Attention map export as FVT1 tensors and grayscale PGM images."""

import os

import numpy as np
from PIL import Image

from src.config import _, logger
from src.errors import AttentionExportError
from src.spectrum.tower import AttentionMaps
from src.tensor import fvt1
from src.tensor.tensor import Tensor


def render_gray(weights: Tensor) -> np.ndarray:
    """Head-averaged map scaled so its maximum becomes 255."""
    array = weights.array.astype(np.float64)
    averaged = array.mean(axis=0) if array.ndim == 3 else array
    peak = averaged.max() if averaged.size else 0.0
    if peak <= 0:
        return np.zeros(averaged.shape, dtype=np.uint8)
    return np.round(averaged / peak * 255.0).astype(np.uint8)


def export_attention(maps: AttentionMaps, directory: str) -> list[str]:
    """Write layer<L>_block<bb>.fvt and .pgm for every captured map."""
    written = []
    try:
        os.makedirs(directory, exist_ok=True)
        for layer, blocks in sorted(maps.layers.items()):
            for index, weights in enumerate(blocks):
                stem = os.path.join(directory, f"layer{layer}_block{index:02d}")
                fvt1.save(stem + ".fvt", weights)
                Image.fromarray(render_gray(weights)).save(stem + ".pgm", format="PPM")
                written.extend([stem + ".fvt", stem + ".pgm"])
    except OSError as error:
        raise AttentionExportError(f"cannot write attention maps to {directory}: {error}") from error
    logger.info(_("Exported {} attention maps to {}").format(len(written) // 2, directory))
    return written
