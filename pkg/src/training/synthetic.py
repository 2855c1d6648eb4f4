"""Synthetic multimodal samples with known emotion labels.

Each of the six labels is an independent fair coin rendered into one
modality: labels 0 and 1 add a low or high tone to the audio, labels 2 and 3
brighten the red or blue channel of every frame, labels 4 and 5 insert a
keyword into the transcript.
"""

from dataclasses import dataclass

import numpy as np

from src.audio.mel import spectrum_windows
from src.audio.wav import Waveform
from src.fusion.head import EMOTIONS
from src.model.config import ModelConfig
from src.model.inputs import SegmentInputs
from src.pipeline.assets import Frame, VideoAssets
from src.tensor.tensor import DType, Tensor
from src.text.tokenizer import Utterance, tokenize

LOW_TONE = 0.0625
HIGH_TONE = 0.3
TONE_AMPLITUDE = 0.3
NOISE = 0.01
BRIGHTNESS = 0.6
FILLER = ("we", "talk", "about", "the", "plan", "for", "today", "and", "then", "go", "home")
KEYWORDS = ("wonderful", "terrible")
FRAMES_PER_SECOND = 2


@dataclass(frozen=True)
class Sample:
    inputs: SegmentInputs
    labels: tuple[int, ...]


def draw_labels(rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(v) for v in rng.integers(0, 2, EMOTIONS))


def synth_audio(rng: np.random.Generator, labels, seconds: float, sample_rate: int) -> Waveform:
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    samples = NOISE * rng.standard_normal(len(t))
    if labels[0]:
        samples += TONE_AMPLITUDE * np.sin(2 * np.pi * LOW_TONE * sample_rate * t)
    if labels[1]:
        samples += TONE_AMPLITUDE * np.sin(2 * np.pi * HIGH_TONE * sample_rate * t)
    return Waveform(np.clip(samples, -1.0, 1.0), sample_rate)


def synth_frame(rng: np.random.Generator, labels, side: int) -> Tensor:
    image = 0.2 + 0.05 * rng.standard_normal((3, side, side))
    if labels[2]:
        image[0] += BRIGHTNESS
    if labels[3]:
        image[2] += BRIGHTNESS
    # frames are 8-bit like decoded video
    return Tensor.wrap(np.rint(np.clip(image, 0.0, 1.0) * 255.0) / 255.0, DType.F32)


def synth_text(rng: np.random.Generator, labels) -> str:
    words = list(rng.choice(FILLER, size=4))
    for flag, keyword in zip(labels[4:], KEYWORDS):
        if flag:
            words.insert(int(rng.integers(0, len(words) + 1)), keyword)
    return " ".join(words)


def make_sample(rng: np.random.Generator, config: ModelConfig, seconds: float = 1.0) -> Sample:
    labels = draw_labels(rng)
    dtype = config.tensor_dtype
    audio = synth_audio(rng, labels, seconds, config.audio.sample_rate)
    spectra = tuple(spectrum_windows(audio, config.audio, config.audio_window_seconds, dtype))
    frames = tuple(synth_frame(rng, labels, config.vision.side).astype(dtype)
                   for _ in range(max(1, int(seconds * FRAMES_PER_SECOND))))
    tokens = tokenize(synth_text(rng, labels), config.text.vocab_size)
    return Sample(SegmentInputs(spectra, frames, tokens), labels)


def make_dataset(rng: np.random.Generator, config: ModelConfig, size: int, seconds: float = 1.0) -> list[Sample]:
    return [make_sample(rng, config, seconds) for _ in range(size)]


def synthetic_assets(rng: np.random.Generator, config: ModelConfig, seconds: float,
                     utterance_seconds: float = 2.5) -> VideoAssets:
    """A longer asset set with labels redrawn for every utterance-length stretch."""
    chunks, frames, utterances = [], [], []
    start = 0.0
    while start < seconds - 1e-9:
        length = min(utterance_seconds, seconds - start)
        labels = draw_labels(rng)
        chunks.append(synth_audio(rng, labels, length, config.audio.sample_rate).samples)
        for k in range(max(1, int(length * FRAMES_PER_SECOND))):
            frames.append(Frame(round(start + k / FRAMES_PER_SECOND, 3), synth_frame(rng, labels, config.vision.side)))
        utterances.append(Utterance(start, start + length, synth_text(rng, labels)))
        start += length
    audio = Waveform(np.concatenate(chunks), config.audio.sample_rate)
    return VideoAssets(audio, frames, utterances)
