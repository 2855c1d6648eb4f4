"""Decoded video assets: audio, time-stamped frames and transcript."""

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.audio.wav import Waveform, read_wav
from src.errors import EmptyAssets, FrameError
from src.model.config import ModelConfig
from src.tensor.tensor import DType, Tensor
from src.text.tokenizer import Utterance, load_transcript

FRAME_NAME = re.compile(r"^frame_(\d+)\.(png|ppm)$", re.IGNORECASE)
AUDIO_FILE = "audio.wav"
FRAMES_DIR = "frames"
TRANSCRIPT_FILE = "transcript.jsonl"


@dataclass(frozen=True)
class Frame:
    timestamp_s: float
    image: Tensor


@dataclass
class VideoAssets:
    audio: Waveform | None = None
    frames: list[Frame] = field(default_factory=list)
    utterances: list[Utterance] = field(default_factory=list)

    def __post_init__(self):
        stamps = [frame.timestamp_s for frame in self.frames]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise FrameError("frame timestamps must be non-decreasing")

    @property
    def is_empty(self) -> bool:
        has_audio = self.audio is not None and len(self.audio.samples) > 0
        return not has_audio and not self.frames and not self.utterances

    @property
    def duration(self) -> float:
        ends = [0.0]
        if self.audio is not None:
            ends.append(self.audio.duration)
        if self.frames:
            ends.append(self.frames[-1].timestamp_s)
        if self.utterances:
            ends.append(max(u.end_s for u in self.utterances))
        return max(ends)


def image_to_tensor(image: Image.Image, side: int, dtype: DType = DType.F32) -> Tensor:
    """RGB image as a 3×side×side tensor in [0, 1], bilinear-resized when needed."""
    image = image.convert("RGB")
    if image.size != (side, side):
        image = image.resize((side, side), Image.Resampling.BILINEAR)
    array = np.asarray(image, dtype=np.float64) / 255.0
    return Tensor.wrap(array.transpose(2, 0, 1), dtype)


def load_frames(directory: str, side: int) -> list[Frame]:
    """Read frame_<ms>.png|ppm files sorted by timestamp; other files are ignored."""
    frames = []
    for name in os.listdir(directory):
        if not name.lower().startswith("frame_"):
            continue
        match = FRAME_NAME.match(name)
        if not match:
            raise FrameError(f"{name}: expected frame_<ms>.png or frame_<ms>.ppm")
        path = os.path.join(directory, name)
        try:
            with Image.open(path) as image:
                tensor = image_to_tensor(image, side)
        except (UnidentifiedImageError, OSError) as error:
            raise FrameError(f"{name}: {error}") from error
        frames.append(Frame(int(match.group(1)) / 1000.0, tensor))
    frames.sort(key=lambda frame: frame.timestamp_s)
    return frames


def load_assets(audio: str, frames: str, transcript: str, config: ModelConfig) -> VideoAssets:
    """Load whichever modalities were given; empty paths are skipped."""
    for path in (audio, transcript):
        if path and not os.path.isfile(path):
            raise FileNotFoundError(f"{path} does not exist")
    if frames and not os.path.isdir(frames):
        raise FileNotFoundError(f"{frames} is not a directory")
    assets = VideoAssets(
        audio=read_wav(audio, config.audio.sample_rate) if audio else None,
        frames=load_frames(frames, config.vision.side) if frames else [],
        utterances=load_transcript(transcript) if transcript else [],
    )
    if assets.is_empty:
        raise EmptyAssets("no modality carries any data")
    return assets


def load_assets_dir(root: str, config: ModelConfig) -> VideoAssets:
    """Directory layout: audio.wav, frames/ and transcript.jsonl, each optional."""
    if not os.path.isdir(root):
        raise FileNotFoundError(f"{root} is not a directory")

    def present(name: str) -> str:
        path = os.path.join(root, name)
        return path if os.path.exists(path) else ""

    return load_assets(present(AUDIO_FILE), present(FRAMES_DIR), present(TRANSCRIPT_FILE), config)
