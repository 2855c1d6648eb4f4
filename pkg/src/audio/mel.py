"""Log-mel spectra resized to the square input of the spectrum tower."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage, signal

from src.audio.wav import Waveform
from src.errors import BadSide, TooShort
from src.tensor.tensor import DType, Tensor

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    n_fft: int = 1024
    hop: int = 256
    n_mels: int = 64
    side: int = 64

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


@dataclass(frozen=True)
class MelSpectrum:
    values: Tensor
    n_fft: int
    hop: int
    n_mels: int
    sample_rate: int

    @property
    def frames(self) -> int:
        return self.values.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def frame_count(length: int, n_fft: int, hop: int) -> int:
    return (length - n_fft) // hop + 1


def stft_power(waveform: Waveform, n_fft: int, hop: int, dtype: DType = DType.F64) -> Tensor:
    """Hann-windowed power spectra, one column per frame, without center padding."""
    samples = np.asarray(waveform.samples, dtype=np.float64)
    if len(samples) < n_fft:
        raise TooShort(f"{len(samples)} samples is shorter than one {n_fft}-sample frame")
    frames = sliding_window_view(samples, n_fft)[::hop]
    spectrum = np.fft.rfft(frames * signal.get_window("hann", n_fft), axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    return Tensor.wrap(power.T, dtype)


def mel_centers(n_mels: int, sample_rate: int) -> np.ndarray:
    """Center frequencies in Hz of the n_mels filters."""
    points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2)
    return mel_to_hz(points)[1:-1]


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, dtype: DType = DType.F64) -> Tensor:
    """Triangular filters on the HTK mel scale between 0 Hz and Nyquist."""
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    bank = np.zeros((n_mels, len(freqs)))
    for m in range(n_mels):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return Tensor.wrap(bank, dtype)


def mel_spectrogram(waveform: Waveform, cfg: MelConfig, dtype: DType = DType.F32) -> MelSpectrum:
    power = stft_power(waveform, cfg.n_fft, cfg.hop).array
    bank = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate).array
    energies = np.log(np.maximum(bank @ power, LOG_FLOOR))
    return MelSpectrum(Tensor.wrap(energies, dtype), cfg.n_fft, cfg.hop, cfg.n_mels, cfg.sample_rate)


def reshape_square(spectrum: MelSpectrum | Tensor, side: int) -> Tensor:
    """Bilinear resize of a mel map to side×side with corner-aligned sampling."""
    if side <= 0 or side % 4 != 0:
        raise BadSide(f"spectrum side {side} is not a positive multiple of 4")
    values = spectrum.values if isinstance(spectrum, MelSpectrum) else spectrum
    array = values.array.astype(np.float64)
    if array.shape == (side, side):
        return Tensor.wrap(array, values.dtype)
    factors = (side / array.shape[0], side / array.shape[1])
    resized = ndimage.zoom(array, factors, order=1, mode="nearest", grid_mode=False)
    return Tensor.wrap(resized, values.dtype)


def spectrum_windows(waveform: Waveform, cfg: MelConfig, window_seconds: float,
                     dtype: DType = DType.F32) -> list[Tensor]:
    """Consecutive square spectra over a segment's audio.

    A trailing window shorter than one analysis frame is dropped.
    """
    step = max(int(round(window_seconds * waveform.sample_rate)), cfg.n_fft)
    windows = []
    for start in range(0, len(waveform.samples), step):
        chunk = Waveform(waveform.samples[start:start + step], waveform.sample_rate)
        if len(chunk.samples) < cfg.n_fft:
            break
        windows.append(reshape_square(mel_spectrogram(chunk, cfg, dtype), cfg.side))
    return windows
