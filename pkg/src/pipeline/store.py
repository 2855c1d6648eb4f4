"""On-disk store of preprocessed segment inputs.

Every segment gets its own directory of artifacts: one FVT1 file per mel
window, one image per frame and a tokens JSON file. A diskcache index maps
segment numbers to their artifact names. Frames that are exact 8-bit RGB
images are written as PNG; any other frame is written as an FVT1 tensor so
reloading is lossless.
"""

import json
import os

import numpy as np
from diskcache import Cache
from PIL import Image, UnidentifiedImageError

from src.errors import FrameError
from src.model.inputs import SegmentInputs
from src.pipeline.assets import image_to_tensor
from src.tensor import fvt1
from src.tensor.tensor import DType, Tensor
from src.text.tokenizer import TokenSequence

INDEX_DIR = "index"
SEGMENT_DIR = "segment_{:04d}"
TOKENS_FILE = "tokens.json"


def frame_pixels(frame: Tensor) -> np.ndarray | None:
    """H×W×3 bytes when the frame is a square RGB image on the 1/255 grid, else None."""
    if frame.ndim != 3 or frame.shape[0] != 3 or frame.shape[1] != frame.shape[2] or frame.size == 0:
        return None
    levels = np.rint(frame.array.astype(np.float64) * 255.0)
    if levels.min() < 0 or levels.max() > 255:
        return None
    if not np.array_equal((levels / 255.0).astype(frame.array.dtype), frame.array):
        return None
    return np.ascontiguousarray(levels.astype(np.uint8).transpose(1, 2, 0))


def load_frame(path: str, dtype: DType) -> Tensor:
    if path.endswith(".fvt"):
        return fvt1.load(path)
    try:
        with Image.open(path) as image:
            return image_to_tensor(image, image.size[0], dtype)
    except (UnidentifiedImageError, OSError) as error:
        raise FrameError(f"{path}: {error}") from error


class SegmentStore:
    """Per-segment artifact directories under one root, indexed with diskcache."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self.index = Cache(os.path.join(directory, INDEX_DIR))

    def put(self, index: int, inputs: SegmentInputs):
        folder = SEGMENT_DIR.format(index)
        root = os.path.join(self.directory, folder)
        os.makedirs(root, exist_ok=True)
        spectra = []
        for k, spectrum in enumerate(inputs.spectra):
            name = f"mel_{k:03d}.fvt"
            fvt1.save(os.path.join(root, name), spectrum)
            spectra.append(name)
        frames = []
        for k, frame in enumerate(inputs.frames):
            pixels = frame_pixels(frame)
            if pixels is None:
                name = f"frame_{k:03d}.fvt"
                fvt1.save(os.path.join(root, name), frame)
            else:
                name = f"frame_{k:03d}.png"
                Image.fromarray(pixels).save(os.path.join(root, name))
            frames.append([name, frame.dtype.value])
        tokens = inputs.tokens
        with open(os.path.join(root, TOKENS_FILE), "w", encoding="utf-8") as f:
            json.dump({"tokens": [int(t) for t in tokens.tokens],
                       "spans": None if tokens.spans is None else [[float(a), float(b)] for a, b in tokens.spans]}, f)
        self.index.set(f"segment_{index}", {"dir": folder, "spectra": spectra, "frames": frames})

    def get(self, index: int) -> SegmentInputs:
        """Re-read and decode every artifact of one segment."""
        record = self.index.get(f"segment_{index}")
        if record is None:
            raise KeyError(f"segment {index} is not stored in {self.directory}")
        root = os.path.join(self.directory, record["dir"])
        spectra = tuple(fvt1.load(os.path.join(root, name)) for name in record["spectra"])
        frames = tuple(load_frame(os.path.join(root, name), DType(code)) for name, code in record["frames"])
        with open(os.path.join(root, TOKENS_FILE), encoding="utf-8") as f:
            stored = json.load(f)
        spans = None if stored["spans"] is None else tuple(tuple(span) for span in stored["spans"])
        return SegmentInputs(spectra, frames, TokenSequence(tuple(stored["tokens"]), spans))

    def __len__(self) -> int:
        return len(self.index)

    def close(self):
        self.index.close()

    def __enter__(self) -> "SegmentStore":
        return self

    def __exit__(self, *exc):
        self.close()
