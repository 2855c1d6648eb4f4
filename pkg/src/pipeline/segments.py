"""Timeline segmentation and per-segment input preparation."""

import math
from dataclasses import dataclass

from src.audio.mel import spectrum_windows
from src.audio.wav import Waveform
from src.errors import EmptyAssets
from src.model.config import ModelConfig
from src.model.inputs import SegmentInputs
from src.pipeline.assets import Frame, VideoAssets
from src.text.tokenizer import TokenSequence, tokenize_utterances

TOLERANCE = 1e-9


@dataclass(frozen=True)
class Segment:
    index: int
    t0: float
    t1: float
    frames: tuple[Frame, ...]
    audio: Waveform | None
    tokens: TokenSequence
    audio_range: tuple[int, int] = (0, 0)


def segment_bounds(duration: float, seg_seconds: float) -> list[tuple[float, float]]:
    """Windows [k·L, (k+1)·L); a remainder of at least L/2 stands alone, a shorter one joins the last window."""
    if seg_seconds <= 0:
        raise ValueError("segment length must be positive")
    if duration <= TOLERANCE:
        return [(0.0, seg_seconds)]
    full = math.floor(duration / seg_seconds + TOLERANCE)
    if full == 0:
        return [(0.0, duration)]
    bounds = [(k * seg_seconds, (k + 1) * seg_seconds) for k in range(full)]
    remainder = duration - full * seg_seconds
    if remainder >= seg_seconds / 2 - TOLERANCE:
        bounds.append((full * seg_seconds, duration))
    elif remainder > TOLERANCE:
        bounds[-1] = (bounds[-1][0], duration)
    return bounds


def segment_timeline(assets: VideoAssets, seg_seconds: float, vocab_size: int = 4096) -> list[Segment]:
    """Partition every modality on the timeline; the last segment is closed on the right."""
    if assets.is_empty:
        raise EmptyAssets("no modality carries any data")
    tokens = tokenize_utterances(assets.utterances, vocab_size)
    bounds = segment_bounds(assets.duration, seg_seconds)
    segments = []
    for index, (t0, t1) in enumerate(bounds):
        last = index == len(bounds) - 1
        frames = tuple(f for f in assets.frames
                       if t0 <= f.timestamp_s and (f.timestamp_s < t1 or (last and f.timestamp_s <= t1)))
        audio, audio_range = None, (0, 0)
        if assets.audio is not None:
            rate = assets.audio.sample_rate
            lo = int(round(t0 * rate))
            hi = len(assets.audio.samples) if last else int(round(t1 * rate))
            audio_range = (min(lo, len(assets.audio.samples)), min(hi, len(assets.audio.samples)))
            audio = Waveform(assets.audio.samples[audio_range[0]:audio_range[1]], rate)
        segments.append(Segment(index, t0, t1, frames, audio, tokens.between(t0, t1, closed=last), audio_range))
    return segments


def prepare_inputs(segment: Segment, config: ModelConfig) -> SegmentInputs:
    """Mel spectra, frame tensors and tokens of one segment, all in memory."""
    dtype = config.tensor_dtype
    spectra = ()
    if segment.audio is not None and len(segment.audio.samples) >= config.audio.n_fft:
        spectra = tuple(spectrum_windows(segment.audio, config.audio, config.audio_window_seconds, dtype))
    frames = tuple(frame.image.astype(dtype) for frame in segment.frames)
    return SegmentInputs(spectra, frames, segment.tokens)
