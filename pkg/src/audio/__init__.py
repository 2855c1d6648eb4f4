"""Audio decoding and the log-mel frontend."""

from src.audio.mel import MelConfig, MelSpectrum, mel_filterbank, mel_spectrogram, reshape_square, stft_power
from src.audio.wav import Waveform, read_wav

__all__ = ['MelConfig', 'MelSpectrum', 'Waveform', 'mel_filterbank', 'mel_spectrogram', 'read_wav',
           'reshape_square', 'stft_power']
