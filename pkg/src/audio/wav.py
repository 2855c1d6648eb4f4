"""WAV input and output."""

import os
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.io import wavfile

from src.errors import UnsupportedCodec, UnsupportedSampleRate

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class Waveform:
    """Mono PCM samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise UnsupportedSampleRate(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def slice_seconds(self, start_s: float, end_s: float) -> "Waveform":
        lo = int(round(start_s * self.sample_rate))
        hi = int(round(end_s * self.sample_rate))
        return Waveform(self.samples[max(lo, 0):max(hi, 0)], self.sample_rate)


def read_wav(path: str, sample_rate: int) -> Waveform:
    """Read 16-bit PCM, average stereo to mono and decimate to sample_rate.

    Only integer decimation factors are supported.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as error:
        raise UnsupportedCodec(f"{os.path.basename(path)}: {error}") from error
    if data.dtype != np.int16:
        raise UnsupportedCodec(f"{os.path.basename(path)}: expected 16-bit PCM, found {data.dtype}")
    samples = data.astype(np.float64) / PCM16_SCALE
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != sample_rate:
        if rate < sample_rate or rate % sample_rate != 0:
            raise UnsupportedSampleRate(
                f"{os.path.basename(path)}: {rate} Hz is not an integer multiple of {sample_rate} Hz")
        samples = signal.decimate(samples, rate // sample_rate, ftype="fir")
    return Waveform(np.clip(samples, -1.0, 1.0), sample_rate)


def write_wav(path: str, waveform: Waveform):
    """Write mono 16-bit PCM."""
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    pcm = np.clip(np.round(waveform.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(path, waveform.sample_rate, pcm)
